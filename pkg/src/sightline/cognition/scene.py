"""Frame reservation and detection-to-text scene descriptions."""
from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import DetectionSet, Frame
from ..spatial import (
    DEPTH_ZONES,
    HORIZONTAL_ZONES,
    NEAR_AREA_DEFAULT,
    capitalize_first,
    count_phrase,
    position_phrase,
    zones,
)

EMPTY_SCENE = "No objects detected in view."


def reserve_frame(frames: Sequence[Frame], query_start_ms: int) -> Optional[Frame]:
    """Latest frame captured at or before the query start, or None."""
    stamps = [f.timestamp for f in frames]
    i = bisect.bisect_right(stamps, query_start_ms)
    return frames[i - 1] if i else None


class FrameBuffer:
    """Bounded buffer of recent frames, oldest first."""

    def __init__(self, maxlen: int = 64):
        self._frames: deque = deque(maxlen=maxlen)

    def push(self, frame: Frame) -> None:
        if self._frames and frame.timestamp <= self._frames[-1].timestamp:
            raise ValueError(
                f"frame {frame.frame_id} at {frame.timestamp} ms is not newer than "
                f"frame {self._frames[-1].frame_id} at {self._frames[-1].timestamp} ms"
            )
        self._frames.append(frame)

    def reserve(self, query_start_ms: int) -> Optional[Frame]:
        return reserve_frame(list(self._frames), query_start_ms)

    def __len__(self):
        return len(self._frames)


@dataclass(frozen=True)
class SceneDescription:
    sentences: tuple = ()
    object_positions: dict = field(default_factory=dict)  # label -> (horizontal, depth)

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


def scene_to_text(detections: DetectionSet, near_area: float = NEAR_AREA_DEFAULT) -> SceneDescription:
    if len(detections) == 0:
        return SceneDescription((EMPTY_SCENE,), {})
    groups: dict = {}
    best: dict = {}
    for det in detections:
        h, d = zones(det, near_area)
        groups[(h, d, det.label)] = groups.get((h, d, det.label), 0) + 1
        if det.label not in best or det.confidence > best[det.label][0]:
            best[det.label] = (det.confidence, (h, d))
    order = sorted(groups, key=lambda k: (HORIZONTAL_ZONES.index(k[0]), DEPTH_ZONES.index(k[1]), k[2]))
    sentences = []
    for h, d, label in order:
        n = groups[(h, d, label)]
        verb = "is" if n == 1 else "are"
        sentences.append(capitalize_first(f"{count_phrase(label, n)} {verb} {position_phrase(h, d)}."))
    positions = {label: pos for label, (_, pos) in sorted(best.items())}
    return SceneDescription(tuple(sentences), positions)
