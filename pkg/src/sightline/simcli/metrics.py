"""Metrics computed from execution traces."""
from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import ExecutionTrace, total_latency


def percentile(values: Sequence[float], q: float) -> Optional[float]:
    """Linear interpolation between closest ranks; None for no values."""
    if not values:
        return None
    ordered = sorted(values)
    pos = (len(ordered) - 1) * q / 100.0
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)


def distribution(values: Sequence[float]) -> dict:
    if not values:
        return {"count": 0, "mean": None, "p50": None, "p95": None}
    return {"count": len(values), "mean": sum(values) / len(values),
            "p50": percentile(values, 50), "p95": percentile(values, 95)}


def pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Pearson r, or None when either side has no variance."""
    if len(xs) != len(ys):
        raise ValueError("pearson needs equal-length inputs")
    if len(xs) < 2:
        return None
    try:
        return statistics.correlation(list(map(float, xs)), list(map(float, ys)))
    except statistics.StatisticsError:
        return None


@dataclass
class MetricsReport:
    interactions: int = 0
    stages: dict = field(default_factory=dict)
    end_to_end: dict = field(default_factory=lambda: distribution([]))
    paths: dict = field(default_factory=dict)
    gate: dict = field(default_factory=dict)
    rewrites: dict = field(default_factory=dict)
    errors: int = 0
    passive: dict = field(default_factory=dict)
    correlations: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "interactions": self.interactions, "stages": self.stages, "end_to_end": self.end_to_end,
            "paths": self.paths, "gate": self.gate, "rewrites": self.rewrites, "errors": self.errors,
            "passive": self.passive, "correlations": self.correlations, "summary": self.summary,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def report_from_traces(traces: Sequence[ExecutionTrace], passive: Optional[dict] = None) -> MetricsReport:
    """Everything in the report except passive counts derives from ``traces``."""
    by_stage: dict = {}
    for tr in traces:
        for s in tr.stages:
            by_stage.setdefault(s.name, []).append(s.duration)
    paths = Counter({"multimodal": 0, "text_fallback": 0, "none": 0})
    gate = Counter({"filtered": 0, "bypassed": 0, "blocked": 0})
    rewrites: Counter = Counter()
    errors = 0
    for tr in traces:
        paths[tr.path.value if tr.path is not None else "none"] += 1
        if tr.gate is None:
            gate["bypassed"] += 1
        else:
            gate["filtered"] += 1
            if not tr.gate.safe:
                gate["blocked"] += 1
        rewrites.update(tr.rewrites)
        errors += tr.error is not None
    return MetricsReport(
        interactions=len(traces),
        stages={name: distribution(v) for name, v in sorted(by_stage.items())},
        end_to_end=distribution([total_latency(t) for t in traces]),
        paths=dict(paths), gate=dict(gate), rewrites=dict(sorted(rewrites.items())),
        errors=errors, passive=dict(passive or {}),
    )


def traces_to_jsonl(traces: Sequence[ExecutionTrace]) -> str:
    return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in traces)


def traces_from_jsonl(text: str) -> list:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(ExecutionTrace.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"traces line {n}: {exc}") from None
    return out
