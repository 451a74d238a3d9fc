"""Scenario files: one JSON record per line, each with a ``type``.

Setup records (no time)::

    {"type": "backend", "name": "vlm", "kind": "multimodal", "latency": 5620,
     "responses": {"door": "The door is on your left.", "default": "..."}}
    {"type": "backend", "name": "asr", "kind": "stt", "latency": 1650}
    {"type": "backend", "name": "rw", "kind": "rewrite", "latency": 1340}
    {"type": "gallery", "person_id": "alice", "description": "Your sister Alice."}

``kind`` is one of multimodal, text, stt, rewrite. Reasoning backends may
set ``"fail": true`` and ``"latency_on": "query"`` (the latency model then
reads the question instead of the answer); stt backends may map audio refs to text with
``"transcripts"``. ``latency`` is a number or a latency-model object.

Timed records (``t`` in ms, non-decreasing through the file)::

    {"type": "session", "t": 0, "mode": "private", "user": "alice", "age": "over18"}
    {"type": "frame", "t": 500, "width": 640, "height": 480,
     "detections": [{"label": "chair", "confidence": 0.9, "bbox": [0.1, 0.5, 0.2, 0.3]}],
     "faces": ["alice"]}
    {"type": "utterance", "t": 1200, "text": "what is in front of me?", "age": "under18"}
    {"type": "config", "t": 2000, "overrides": {"latency_threshold_ms": 4000}}

Utterances take ``text`` or an ``audio`` ref (needs an stt backend), and
optionally ``id``, ``age`` (declared), ``age_answer`` (yes/no/no_answer,
the reply to the age prompt) and ``reply`` (forces the backend's answer).
Blank lines and lines starting with ``#`` are skipped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..core import AgeRange, Config, ConfigError, DetectionSet, Frame, Mode, SightlineError
from ..perception import FaceGalleryEntry
from ..voiceid import PromptAnswer
from .latency_models import LatencySpecError, latency_from_spec

BACKEND_KINDS = ("multimodal", "text", "stt", "rewrite")


class ScenarioError(SightlineError):
    pass


@dataclass
class BackendSpec:
    name: str
    kind: str
    latency: dict
    responses: dict = field(default_factory=dict)
    transcripts: dict = field(default_factory=dict)
    fail: bool = False
    latency_on: str = "reply"


@dataclass
class FrameEvent:
    t: int
    frame: Frame
    faces: tuple = ()


@dataclass
class UtteranceEvent:
    t: int
    interaction_id: str
    text: Optional[str] = None
    audio: Optional[str] = None
    age: Optional[AgeRange] = None
    age_answer: Optional[PromptAnswer] = None
    reply: Optional[str] = None


@dataclass
class ConfigEvent:
    t: int
    overrides: dict


@dataclass
class SessionEvent:
    t: int
    mode: Mode = Mode.PRIVATE
    user: Optional[str] = None
    age: AgeRange = AgeRange.UNKNOWN
    notes: Optional[str] = None


@dataclass
class Scenario:
    backends: list = field(default_factory=list)
    gallery: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def backend(self, kind: str) -> Optional[BackendSpec]:
        for b in self.backends:
            if b.kind == kind:
                return b
        return None


_FIELDS = {
    "backend": {"type", "name", "kind", "latency", "latency_on", "responses", "transcripts", "fail"},
    "gallery": {"type", "person_id", "description", "template"},
    "session": {"type", "t", "mode", "user", "age", "notes"},
    "frame": {"type", "t", "id", "width", "height", "detections", "faces"},
    "utterance": {"type", "t", "id", "text", "audio", "age", "age_answer", "reply"},
    "config": {"type", "t", "overrides"},
}
_REQUIRED = {
    "backend": {"name", "kind"},
    "gallery": {"person_id", "description"},
    "session": set(),
    "frame": {"t"},
    "utterance": {"t"},
    "config": {"t", "overrides"},
}


def _int(rec: dict, key: str, default=None) -> int:
    value = rec.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{key!r} must be an integer")
    if value < 0:
        raise ValueError(f"{key!r} must be >= 0")
    return value


def _opt_str(rec: dict, key: str) -> Optional[str]:
    value = rec.get(key)
    if value is not None and not isinstance(value, str):
        raise ValueError(f"{key!r} must be a string")
    return value


def _record(rec: dict, scenario: Scenario, state: dict):
    if not isinstance(rec, dict):
        raise ValueError("record must be a JSON object")
    kind = rec.get("type")
    if kind not in _FIELDS:
        raise ValueError(f"unknown record type {kind!r}")
    extra = set(rec) - _FIELDS[kind]
    if extra:
        raise ValueError(f"unknown field(s) for {kind}: {sorted(extra)}")
    missing = _REQUIRED[kind] - set(rec)
    if missing:
        raise ValueError(f"{kind} record is missing {sorted(missing)}")

    if kind == "backend":
        bkind = rec["kind"]
        if bkind not in BACKEND_KINDS:
            raise ValueError(f"backend kind must be one of {BACKEND_KINDS}")
        if any(b.name == rec["name"] for b in scenario.backends):
            raise ValueError(f"duplicate backend name {rec['name']!r}")
        latency = rec.get("latency", 0)
        latency_from_spec(latency)  # validate early
        latency_on = rec.get("latency_on", "reply")
        if latency_on not in ("reply", "query"):
            raise ValueError("'latency_on' must be 'reply' or 'query'")
        for key in ("responses", "transcripts"):
            if not isinstance(rec.get(key, {}), dict):
                raise ValueError(f"{key!r} must be an object")
        scenario.backends.append(BackendSpec(str(rec["name"]), bkind, latency,
                                             dict(rec.get("responses", {})),
                                             dict(rec.get("transcripts", {})),
                                             bool(rec.get("fail", False)), latency_on))
        return
    if kind == "gallery":
        pid = str(rec["person_id"])
        if pid in scenario.gallery:
            raise ValueError(f"duplicate gallery person_id {pid!r}")
        scenario.gallery[pid] = FaceGalleryEntry(pid, str(rec.get("template", "")), str(rec["description"]))
        return

    t = _int(rec, "t", 0)
    if t < state["t"]:
        raise ValueError(f"time {t} goes backwards (previous event at {state['t']})")
    state["t"] = t
    if kind == "session":
        scenario.events.append(SessionEvent(t, Mode(rec.get("mode", "private")), _opt_str(rec, "user"),
                                            AgeRange(rec.get("age", "unknown")), _opt_str(rec, "notes")))
    elif kind == "frame":
        if state["frame_t"] is not None and t <= state["frame_t"]:
            raise ValueError(f"frame at {t} ms is not later than the previous frame")
        state["frame_t"] = t
        state["frames"] += 1
        frame_id = _int(rec, "id", state["frames"])
        dets = rec.get("detections", [])
        if not isinstance(dets, list):
            raise ValueError("'detections' must be a list")
        faces = rec.get("faces", [])
        if not isinstance(faces, list) or not all(isinstance(f, str) for f in faces):
            raise ValueError("'faces' must be a list of person ids")
        frame = Frame(frame_id, t, _int(rec, "width", 640), _int(rec, "height", 480), None,
                      DetectionSet.from_list(dets))
        scenario.events.append(FrameEvent(t, frame, tuple(faces)))
    elif kind == "utterance":
        state["utterances"] += 1
        text, audio = _opt_str(rec, "text"), _opt_str(rec, "audio")
        if text is None and audio is None:
            raise ValueError("utterance needs 'text' or 'audio'")
        if text is not None and not text.strip():
            raise ValueError("utterance text is empty")
        if text is None:
            stt = scenario.backend("stt")
            if stt is None:
                raise ValueError("audio utterance needs an stt backend declared earlier in the file")
            if audio not in stt.transcripts:
                raise ValueError(f"stt backend has no transcript for audio ref {audio!r}")
        iid = _opt_str(rec, "id") or f"u{state['utterances']}"
        if iid in state["ids"]:
            raise ValueError(f"duplicate utterance id {iid!r}")
        state["ids"].add(iid)
        age = AgeRange(rec["age"]) if rec.get("age") is not None else None
        answer = PromptAnswer(rec["age_answer"]) if rec.get("age_answer") is not None else None
        scenario.events.append(UtteranceEvent(t, iid, text, audio, age, answer, _opt_str(rec, "reply")))
    else:
        if not isinstance(rec["overrides"], dict):
            raise ValueError("'overrides' must be an object")
        try:
            Config().with_overrides(rec["overrides"])
        except ConfigError as exc:
            raise ValueError(str(exc)) from None
        scenario.events.append(ConfigEvent(t, dict(rec["overrides"])))


def scenario_from_records(records, line_numbers=None) -> Scenario:
    scenario = Scenario()
    state = {"t": 0, "frames": 0, "frame_t": None, "utterances": 0, "ids": set()}
    for i, rec in enumerate(records):
        line = line_numbers[i] if line_numbers else i + 1
        try:
            _record(rec, scenario, state)
        except ScenarioError:
            raise
        except (ValueError, TypeError, KeyError, LatencySpecError) as exc:
            raise ScenarioError(f"line {line}: {exc}") from None
    return scenario


def parse_scenario(text: str) -> Scenario:
    records, lines = [], []
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            records.append(json.loads(stripped))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"line {n}: invalid JSON: {exc.msg}") from None
        lines.append(n)
    return scenario_from_records(records, lines)


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror or exc}") from None


def dump_records(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
