"""Latency estimates per backend and the threshold router."""
from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass
from typing import Optional

from ..core import ExecutionPath

DEFAULT_BUFFER = 32


@dataclass(frozen=True)
class LatencyStats:
    ewma: Optional[float] = None
    samples: tuple = ()  # most recent observations, oldest first
    sample_count: int = 0
    capacity: int = DEFAULT_BUFFER

    def percentile(self, q: float) -> Optional[float]:
        if not self.samples:
            return None
        ordered = sorted(self.samples)
        pos = (len(ordered) - 1) * q / 100.0
        lo = int(pos)
        hi = min(lo + 1, len(ordered) - 1)
        return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)


def update_latency(stats: LatencyStats, observed_ms: float, alpha: float) -> LatencyStats:
    """EWMA update; the first observation seeds the average."""
    if observed_ms < 0:
        raise ValueError(f"latency cannot be negative: {observed_ms}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if stats.ewma is None:
        ewma = float(observed_ms)
    else:
        ewma = alpha * observed_ms + (1.0 - alpha) * stats.ewma
    samples = (stats.samples + (observed_ms,))[-stats.capacity:]
    return dataclasses.replace(stats, ewma=ewma, samples=samples, sample_count=stats.sample_count + 1)


def select_path(stats: LatencyStats, latency_threshold_ms: float) -> ExecutionPath:
    """Text fallback only when the estimate strictly exceeds the threshold."""
    if latency_threshold_ms <= 0:
        raise ValueError("latency threshold must be positive")
    if stats.ewma is not None and stats.ewma > latency_threshold_ms:
        return ExecutionPath.TEXT_FALLBACK
    return ExecutionPath.MULTIMODAL


class LatencyBook:
    """Shared per-backend stats; updates are serialized."""

    def __init__(self, capacity: int = DEFAULT_BUFFER):
        self._capacity = capacity
        self._stats: dict = {}
        self._lock = threading.Lock()

    def get(self, name: str) -> LatencyStats:
        with self._lock:
            return self._stats.get(name, LatencyStats(capacity=self._capacity))

    def observe(self, name: str, observed_ms: float, alpha: float) -> LatencyStats:
        with self._lock:
            current = self._stats.get(name, LatencyStats(capacity=self._capacity))
            self._stats[name] = update_latency(current, observed_ms, alpha)
            return self._stats[name]

    def force(self, name: str, ewma: float) -> None:
        """Overwrite the estimate, e.g. from an operator or a health probe."""
        with self._lock:
            current = self._stats.get(name, LatencyStats(capacity=self._capacity))
            self._stats[name] = dataclasses.replace(current, ewma=float(ewma),
                                                    sample_count=max(1, current.sample_count))

    def reset(self, name: Optional[str] = None) -> None:
        with self._lock:
            if name is None:
                self._stats.clear()
            else:
                self._stats.pop(name, None)

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._stats)
