"""Routing, scene description, prompting and reasoning for active queries."""
from .backends import (
    BackendError,
    BackendRegistry,
    BackendReply,
    Capability,
    HttpReasoningBackend,
    ListSink,
    MockBackend,
    PassThroughTranscriber,
    backend_http_handler,
)
from .latency import LatencyBook, LatencyStats, select_path, update_latency
from .pipeline import BACKEND_FAILURE_MESSAGE, answer
from .prompt import BVI_INSTRUCTIONS, Prompt, PromptError, build_prompt
from .scene import EMPTY_SCENE, FrameBuffer, SceneDescription, reserve_frame, scene_to_text

__all__ = [
    "BackendError", "BackendRegistry", "BackendReply", "Capability", "HttpReasoningBackend",
    "ListSink", "MockBackend", "PassThroughTranscriber", "backend_http_handler", "LatencyBook",
    "LatencyStats", "select_path", "update_latency", "BACKEND_FAILURE_MESSAGE", "answer",
    "BVI_INSTRUCTIONS", "Prompt", "PromptError", "build_prompt", "EMPTY_SCENE", "FrameBuffer",
    "SceneDescription", "reserve_frame", "scene_to_text",
]
