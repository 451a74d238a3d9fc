"""One active interaction: route, reason, rewrite."""
from __future__ import annotations

import dataclasses
from typing import Callable, Optional

from ..core import (
    Config,
    ExecutionPath,
    ExecutionTrace,
    FusedInput,
    WallClock,
    record_stage,
)
from ..safety import RuleSet, rewrite_response
from .backends import BackendError, BackendRegistry, Capability
from .latency import LatencyBook, select_path
from .prompt import build_prompt
from .scene import scene_to_text

BACKEND_FAILURE_MESSAGE = "Sorry, I could not get an answer right now. Please try again."


def answer(fused: FusedInput, backends: BackendRegistry, stats: LatencyBook, config: Config,
           rules: RuleSet, *, clock=None, trace: Optional[ExecutionTrace] = None,
           rewrite_cost: Optional[Callable[[str], int]] = None) -> tuple:
    """Answer one fused query; returns ``(final_text, trace)``.

    The multimodal backend's latency estimate picks the path before anything
    is invoked. Without a frame the text path is the only option and the
    session's environment notes stand in for the scene. ``rewrite_cost``
    gives the simulated duration of the rewrite stage.
    """
    clock = clock if clock is not None else WallClock()
    trace = trace if trace is not None else ExecutionTrace("interaction")
    multimodal = backends.first(Capability.MULTIMODAL)
    text_only = backends.first(Capability.TEXT_ONLY)

    start = clock.now()
    if fused.frame is None:
        path = ExecutionPath.TEXT_FALLBACK
    else:
        path = select_path(stats.get(multimodal.name), config.latency_threshold_ms)
    scene = None
    if path is ExecutionPath.TEXT_FALLBACK and fused.frame is not None:
        scene = scene_to_text(fused.frame.detections, config.near_area_threshold)
    prompt = build_prompt(fused, path, scene)
    backend = multimodal if path is ExecutionPath.MULTIMODAL else text_only
    trace = record_stage(trace, "route", start, clock.now())
    trace = dataclasses.replace(trace, path=path, backend=backend.name)

    start = clock.now()
    try:
        reply = backend.invoke(prompt, fused.frame if path is ExecutionPath.MULTIMODAL else None)
    except BackendError as exc:
        trace = record_stage(trace, "reason", start, clock.now())
        return BACKEND_FAILURE_MESSAGE, dataclasses.replace(trace, error=str(exc))
    clock.spend(reply.latency_ms)
    stats.observe(backend.name, reply.latency_ms, config.ewma_alpha)
    trace = record_stage(trace, "reason", start, clock.now())

    start = clock.now()
    detections = fused.frame.detections if fused.frame is not None else None
    result = rewrite_response(reply.text, rules, detections, config.near_area_threshold,
                              query=fused.query_text)
    if rewrite_cost is not None:
        clock.spend(int(rewrite_cost(reply.text)))
    trace = record_stage(trace, "rewrite", start, clock.now())
    trace = dataclasses.replace(trace, rewrites=tuple(result.rule_ids))
    return result.text, trace
