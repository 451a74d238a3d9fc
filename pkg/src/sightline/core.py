"""Domain types, configuration, clocks and the per-interaction execution trace.

Every time value in the package is an integer number of milliseconds on a
session-local clock.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml


class SightlineError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class ConfigError(SightlineError):
    pass


class AgeRange(str, Enum):
    UNDER_18 = "under18"
    OVER_18 = "over18"
    UNKNOWN = "unknown"


class Mode(str, Enum):
    PRIVATE = "private"
    PUBLIC = "public"


class ExecutionPath(str, Enum):
    MULTIMODAL = "multimodal"
    TEXT_FALLBACK = "text_fallback"


# ---------------------------------------------------------------------------
# Inputs


@dataclass(frozen=True, eq=False)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int
    start_time: int = 0

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be a 1-D mono sequence")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_ms(self) -> int:
        return int(len(self.samples) * 1000 // self.sample_rate)


@dataclass(frozen=True)
class Detection:
    label: str
    confidence: float
    bbox: tuple  # (x, y, w, h), normalized

    def __post_init__(self):
        if not self.label:
            raise ValueError("detection label must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        x, y, w, h = (float(v) for v in self.bbox)
        eps = 1e-9
        if min(x, y, w, h) < -eps or x + w > 1 + eps or y + h > 1 + eps:
            raise ValueError(f"bbox {self.bbox} is not inside the unit square")
        object.__setattr__(self, "bbox", (x, y, w, h))

    @property
    def center_x(self) -> float:
        return self.bbox[0] + self.bbox[2] / 2

    @property
    def area(self) -> float:
        return self.bbox[2] * self.bbox[3]

    def to_dict(self) -> dict:
        return {"label": self.label, "confidence": self.confidence, "bbox": list(self.bbox)}

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(str(d["label"]), float(d.get("confidence", 1.0)), tuple(d["bbox"]))


@dataclass(frozen=True)
class DetectionSet:
    items: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def labels(self) -> list:
        return [d.label for d in self.items]

    def to_list(self) -> list:
        return [d.to_dict() for d in self.items]

    @classmethod
    def from_list(cls, rows: Sequence[dict]) -> "DetectionSet":
        return cls(tuple(Detection.from_dict(r) for r in rows))


@dataclass(frozen=True, eq=False)
class Frame:
    """A captured image plus its detections.

    ``pixels`` may be None for detection-only frames (scenario replay); when
    present it must hold width*height luminance values or width*height RGB
    triples.
    """

    frame_id: int
    timestamp: int
    width: int = 0
    height: int = 0
    pixels: Optional[np.ndarray] = None
    detections: DetectionSet = field(default_factory=DetectionSet)

    def __post_init__(self):
        if self.pixels is not None:
            arr = np.asarray(self.pixels, dtype=np.uint8)
            n = arr.shape[0] * arr.shape[1] if arr.ndim >= 2 else arr.size
            if arr.ndim == 3 and arr.shape[2] != 3:
                raise ValueError("RGB pixels must have 3 channels")
            if n != self.width * self.height:
                raise ValueError(
                    f"pixel grid {arr.shape} does not match {self.width}x{self.height}"
                )
            object.__setattr__(self, "pixels", arr)


@dataclass(frozen=True)
class SessionContext:
    mode: Mode = Mode.PRIVATE
    user: Optional[str] = None
    age_range: AgeRange = AgeRange.UNKNOWN
    environment_notes: Optional[str] = None

    def __post_init__(self):
        if self.mode is Mode.PUBLIC and self.user is not None:
            raise ValueError("public sessions never carry a user identity")

    def authenticated(self, user: str) -> "SessionContext":
        if self.mode is not Mode.PRIVATE:
            raise ValueError("only private sessions authenticate users")
        return dataclasses.replace(self, user=user)


@dataclass(frozen=True)
class FusedInput:
    query_text: str
    query_start: int
    frame: Optional[Frame] = None
    session: SessionContext = field(default_factory=SessionContext)

    def __post_init__(self):
        if self.frame is not None and self.frame.timestamp > self.query_start:
            raise ValueError("reserved frame must not be newer than the query start")


@dataclass(frozen=True)
class SafetyVerdict:
    """Outcome of the query classifier. ``category`` is None when safe."""

    category: Optional[str] = None
    evidence: Optional[str] = None

    @property
    def safe(self) -> bool:
        return self.category is None

    def to_dict(self) -> dict:
        if self.safe:
            return {"verdict": "safe"}
        return {"verdict": "unsafe", "category": self.category, "evidence": self.evidence}


SAFE = SafetyVerdict()


# ---------------------------------------------------------------------------
# Clocks


class VirtualClock:
    """Event-driven clock; time moves only through ``tick``/``advance_to``."""

    virtual = True

    def __init__(self, start: int = 0):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def tick(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("cannot tick backwards")
        self._now += int(ms)
        return self._now

    def advance_to(self, t: int) -> int:
        self._now = max(self._now, int(t))
        return self._now

    # work that takes ``ms`` consumes virtual time
    spend = tick


class WallClock:
    """Monotonic wall clock, milliseconds since construction."""

    virtual = False

    def __init__(self):
        self._origin = time.monotonic_ns()

    def now(self) -> int:
        return (time.monotonic_ns() - self._origin) // 1_000_000

    def tick(self, ms: int) -> int:
        raise TypeError("a wall clock cannot be ticked")

    def advance_to(self, t: int) -> int:
        return self.now()

    def spend(self, ms: int) -> int:
        # real work already took real time
        return self.now()


def now(clock) -> int:
    return clock.now()


# ---------------------------------------------------------------------------
# Execution trace


@dataclass(frozen=True)
class Stage:
    name: str
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class ExecutionTrace:
    interaction_id: str
    stages: tuple = ()
    path: Optional[ExecutionPath] = None
    gate: Optional[SafetyVerdict] = None  # None: gate bypassed
    rewrites: tuple = ()
    backend: Optional[str] = None
    error: Optional[str] = None

    def stage_names(self) -> list:
        return [s.name for s in self.stages]

    def stage(self, name: str) -> Optional[Stage]:
        for s in self.stages:
            if s.name == name:
                return s
        return None

    def to_dict(self) -> dict:
        return {
            "interaction_id": self.interaction_id,
            "stages": [[s.name, s.start, s.end] for s in self.stages],
            "path": self.path.value if self.path else None,
            "gate": "bypassed" if self.gate is None else self.gate.to_dict(),
            "rewrites": list(self.rewrites),
            "backend": self.backend,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutionTrace":
        gate = d.get("gate", "bypassed")
        verdict = None
        if gate != "bypassed":
            verdict = SafetyVerdict(gate.get("category"), gate.get("evidence"))
        return cls(
            interaction_id=d["interaction_id"],
            stages=tuple(Stage(n, int(s), int(e)) for n, s, e in d["stages"]),
            path=ExecutionPath(d["path"]) if d.get("path") else None,
            gate=verdict,
            rewrites=tuple(d.get("rewrites", ())),
            backend=d.get("backend"),
            error=d.get("error"),
        )


def record_stage(trace: ExecutionTrace, stage_name: str, start_ms: int, end_ms: int) -> ExecutionTrace:
    if end_ms < start_ms:
        raise ValueError(f"stage {stage_name!r} ends ({end_ms}) before it starts ({start_ms})")
    return dataclasses.replace(trace, stages=trace.stages + (Stage(stage_name, int(start_ms), int(end_ms)),))


def total_latency(trace: ExecutionTrace) -> int:
    return sum(s.duration for s in trace.stages)


def is_sequential(trace: ExecutionTrace) -> bool:
    return all(a.end <= b.start for a, b in zip(trace.stages, trace.stages[1:]))


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class Config:
    # routing; the reference system never published its limit, 10 s is ours
    latency_threshold_ms: int = 10_000
    ewma_alpha: float = 0.3
    latency_buffer_size: int = 32
    # voice identity
    # twice the largest clip-to-profile distance seen on synthetic enrollments; recalibrate per device
    auth_distance_threshold: float = 2.0
    age_pitch_threshold_hz: float = 260.0
    mfcc_sample_rate: int = 16_000
    mfcc_pre_emphasis: float = 0.97
    mfcc_frame_len_ms: int = 25
    mfcc_frame_hop_ms: int = 10
    mfcc_n_filters: int = 26
    mfcc_n_coeffs: int = 13
    mfcc_f_min_hz: float = 0.0
    mfcc_f_max_hz: float = 8000.0
    # passive perception
    permanence_window_ms: int = 3000
    announce_min_interval_ms: int = 2000
    ocr_enabled: bool = False
    near_area_threshold: float = 0.15
    frame_buffer_size: int = 64
    # edge link
    service_name: str = "sightline-edge"
    discovery_timeout_ms: int = 500
    # files
    rules_path: Optional[str] = None
    taxonomy_path: Optional[str] = None
    store_path: str = "profiles.json"
    gallery_path: str = "gallery.json"
    pin_store_path: str = "known_hosts.json"

    def __post_init__(self):
        for name in ("latency_threshold_ms", "auth_distance_threshold", "age_pitch_threshold_hz",
                     "mfcc_sample_rate", "mfcc_frame_len_ms", "mfcc_frame_hop_ms",
                     "mfcc_n_filters", "mfcc_n_coeffs", "latency_buffer_size",
                     "frame_buffer_size", "discovery_timeout_ms"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)}")
        for name in ("permanence_window_ms", "announce_min_interval_ms"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ConfigError(f"ewma_alpha must be in (0, 1], got {self.ewma_alpha}")
        if not 0.0 < self.near_area_threshold < 1.0:
            raise ConfigError("near_area_threshold must be in (0, 1)")
        if self.mfcc_n_coeffs > self.mfcc_n_filters:
            raise ConfigError("mfcc_n_coeffs cannot exceed mfcc_n_filters")
        if not 0 <= self.mfcc_f_min_hz < self.mfcc_f_max_hz <= self.mfcc_sample_rate / 2:
            raise ConfigError("mel filterbank band must lie within [0, sample_rate/2]")

    def with_overrides(self, overrides: dict) -> "Config":
        if not overrides:
            return self
        names = {f.name: f for f in dataclasses.fields(self)}
        clean = {}
        for key, value in overrides.items():
            if key not in names:
                raise ConfigError(f"unknown config field {key!r}")
            clean[key] = _coerce(names[key], value)
        return dataclasses.replace(self, **clean)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _coerce(f: dataclasses.Field, value: Any) -> Any:
    typ = str(f.type)
    if value is None:
        if "Optional" in typ:
            return None
        raise ConfigError(f"{f.name} cannot be null")
    try:
        if typ == "bool":
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return lowered in ("true", "1", "yes")
            return bool(value)
        if typ == "int":
            fv = float(value)
            if not math.isfinite(fv) or fv != int(fv):
                raise ValueError(value)
            return int(fv)
        if typ == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for {f.name} ({typ})") from None


def load_config(path=None, overrides: Optional[dict] = None) -> Config:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
    merged = dict(data)
    merged.update(overrides or {})
    return Config().with_overrides(merged)
