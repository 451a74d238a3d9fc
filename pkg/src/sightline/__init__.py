"""Assistive vision pipeline: voice identity, safety gating, latency-aware
reasoning, answer rewriting, passive perception and the edge image link.

Every model sits behind a backend interface with deterministic mocks, so the
whole pipeline replays on a virtual clock.
"""
from .core import (
    AgeRange,
    AudioSignal,
    Config,
    ConfigError,
    Detection,
    DetectionSet,
    ExecutionPath,
    ExecutionTrace,
    Frame,
    FusedInput,
    Mode,
    SafetyVerdict,
    SessionContext,
    SightlineError,
    VirtualClock,
    WallClock,
    load_config,
)

__version__ = "0.1.0"

__all__ = [
    "AgeRange", "AudioSignal", "Config", "ConfigError", "Detection", "DetectionSet",
    "ExecutionPath", "ExecutionTrace", "Frame", "FusedInput", "Mode", "SafetyVerdict",
    "SessionContext", "SightlineError", "VirtualClock", "WallClock", "load_config", "__version__",
]
