"""Passive perception: what to announce from the camera feed, and when.

Novelty rule, per label: a label in the current frame is announced when it
has never been seen, or when it was missing from the previous processed
frame and its last sighting is more than ``permanence_window_ms`` old. With
a window of 0 this is plain "not in the previous frame" novelty.
"""
from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Protocol, Sequence

from .core import DetectionSet, Frame
from .spatial import capitalize_first, count_phrase

PERSON_LABEL = "person"
TEXT_LABEL = "text"


class SceneTask(str, Enum):
    FACE_RECOGNITION = "face_recognition"
    OCR = "ocr"


def scene_tasks(detections: DetectionSet, config=None) -> frozenset:
    """Expensive follow-up tasks worth running for these detections.

    ``config`` is a Config (its ``ocr_enabled`` flag is read) or a bool.
    """
    ocr_enabled = bool(getattr(config, "ocr_enabled", config))
    labels = set(detections.labels())
    tasks = set()
    if PERSON_LABEL in labels:
        tasks.add(SceneTask.FACE_RECOGNITION)
    if TEXT_LABEL in labels and ocr_enabled:
        tasks.add(SceneTask.OCR)
    return frozenset(tasks)


class AnnouncementKind(str, Enum):
    OBJECT_APPEARED = "object_appeared"
    PERSON_RECOGNIZED = "person_recognized"


@dataclass(frozen=True)
class Announcement:
    kind: AnnouncementKind
    key: str  # object label or person id
    timestamp: int
    count: int = 1
    description: Optional[str] = None
    known: bool = True  # False for faces missing from the gallery

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("announcement count must be >= 1")

    @classmethod
    def object_appeared(cls, label: str, count: int, timestamp: int) -> "Announcement":
        return cls(AnnouncementKind.OBJECT_APPEARED, label, timestamp, count)

    @classmethod
    def person_recognized(cls, person_id: str, description: Optional[str], timestamp: int,
                          known: bool = True) -> "Announcement":
        return cls(AnnouncementKind.PERSON_RECOGNIZED, person_id, timestamp, 1, description, known)

    @property
    def text(self) -> str:
        if self.kind is AnnouncementKind.OBJECT_APPEARED:
            return capitalize_first(f"{count_phrase(self.key, self.count)} in view.")
        if not self.known:
            return "Someone you have not met before is here."
        return f"{capitalize_first(self.key)} is here. {capitalize_first(self.description)}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "key": self.key, "count": self.count,
                "timestamp": self.timestamp, "text": self.text}


@dataclass(frozen=True)
class PermanenceParams:
    permanence_window_ms: int = 3000
    announce_min_interval_ms: int = 2000

    def __post_init__(self):
        if self.permanence_window_ms < 0 or self.announce_min_interval_ms < 0:
            raise ValueError("permanence window and announce interval must be >= 0")

    @classmethod
    def from_config(cls, cfg) -> "PermanenceParams":
        return cls(cfg.permanence_window_ms, cfg.announce_min_interval_ms)


@dataclass(frozen=True)
class PerceptionState:
    last_seen: Mapping = field(default_factory=dict)       # label -> ms
    last_announced: Mapping = field(default_factory=dict)  # label -> ms
    session_faces: frozenset = frozenset()
    previous_labels: frozenset = frozenset()


def process_frame(frame: Frame, state: PerceptionState, params: PermanenceParams,
                  now_ms: int) -> tuple:
    counts = Counter(frame.detections.labels())
    announcements = []
    for label in sorted(counts):
        if label in state.previous_labels:
            continue
        seen = state.last_seen.get(label)
        if seen is None or now_ms - seen > params.permanence_window_ms:
            announcements.append(Announcement.object_appeared(label, counts[label], now_ms))
    last_seen = dict(state.last_seen)
    last_seen.update({label: now_ms for label in counts})
    new_state = dataclasses.replace(state, last_seen=last_seen, previous_labels=frozenset(counts))
    return announcements, new_state


@dataclass(frozen=True)
class FaceGalleryEntry:
    person_id: str
    template: str  # opaque token owned by the face backend
    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError(f"gallery entry {self.person_id!r} needs a description")


class FaceBackend(Protocol):
    def recognize(self, frame: Frame) -> Sequence[str]:
        """Person ids visible in ``frame``."""


class MockFaceBackend:
    """Looks faces up in a fixed frame_id -> person ids table."""

    def __init__(self, table: Optional[Mapping] = None):
        self.table = dict(table or {})
        self.calls = 0

    def recognize(self, frame: Frame) -> Sequence[str]:
        self.calls += 1
        return list(self.table.get(frame.frame_id, ()))


def recognize_and_anchor(frame: Frame, gallery: Mapping, backend: FaceBackend,
                         state: PerceptionState, now_ms: Optional[int] = None) -> tuple:
    """Announce each person once per session with their stored description.

    ``gallery`` maps person id to FaceGalleryEntry. Ids the backend reports
    but the gallery lacks are announced as unknown people.
    """
    now_ms = frame.timestamp if now_ms is None else now_ms
    faces = set(state.session_faces)
    out = []
    for pid in backend.recognize(frame):
        if pid in faces:
            continue
        faces.add(pid)
        entry = gallery.get(pid)
        if entry is None:
            out.append(Announcement.person_recognized(pid, None, now_ms, known=False))
        else:
            out.append(Announcement.person_recognized(pid, entry.description, now_ms))
    return out, dataclasses.replace(state, session_faces=frozenset(faces))


def throttle(pending: Sequence[Announcement], state: PerceptionState, params: PermanenceParams,
             now_ms: int) -> tuple:
    """Split ``pending`` into (emitted, deferred, state').

    Object announcements for one label are spaced at least
    ``announce_min_interval_ms`` apart; person announcements always pass.
    """
    last = dict(state.last_announced)
    emitted, deferred = [], []
    for a in pending:
        if a.kind is AnnouncementKind.PERSON_RECOGNIZED:
            emitted.append(a)
            continue
        t = max(a.timestamp, now_ms)
        prev = last.get(a.key)
        if prev is None or t - prev >= params.announce_min_interval_ms:
            last[a.key] = t
            emitted.append(a)
        else:
            deferred.append(a)
    return emitted, deferred, dataclasses.replace(state, last_announced=last)
