"""Deterministic replay of a scenario on a virtual clock.

Frames go into the frame buffer and, unless an active interaction is in
progress, through passive perception. Utterances run
stt -> gate (minors only) -> route -> reason -> rewrite. An utterance that
arrives while another is being answered waits for it to finish. Responses
are spoken when their interaction ends; passive announcements when their
frame arrives.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from ..cognition import BackendRegistry, Capability, FrameBuffer, LatencyBook, MockBackend, answer
from ..core import (
    AgeRange,
    Config,
    ExecutionTrace,
    FusedInput,
    SessionContext,
    VirtualClock,
    record_stage,
)
from ..perception import (
    MockFaceBackend,
    PerceptionState,
    PermanenceParams,
    SceneTask,
    process_frame,
    recognize_and_anchor,
    scene_tasks,
    throttle,
)
from ..safety import gate_query, load_rules, load_taxonomy
from ..voiceid import AGE_PROMPT, PromptAnswer, confirm_age
from .latency_models import latency_from_spec
from .metrics import MetricsReport, report_from_traces
from .scenario import ConfigEvent, FrameEvent, Scenario, ScenarioError, SessionEvent, UtteranceEvent


@dataclass(frozen=True)
class TranscriptEntry:
    t: int
    seq: int
    kind: str  # announcement, prompt, response, refusal, error
    text: str
    ref: str

    def to_dict(self) -> dict:
        return {"t": self.t, "seq": self.seq, "kind": self.kind, "text": self.text, "ref": self.ref}


def transcript_to_jsonl(transcript) -> str:
    return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in transcript)


def _reasoning_backend(spec) -> MockBackend:
    model = latency_from_spec(spec.latency)
    if spec.latency_on == "query":
        def latency(query, reply):
            return model.sample(query)
    else:
        def latency(query, reply):
            return model.sample(reply)
    cap = Capability.MULTIMODAL if spec.kind == "multimodal" else Capability.TEXT_ONLY
    return MockBackend(spec.name, cap, spec.responses, latency, spec.fail)


class _Replay:
    def __init__(self, scenario: Scenario, config: Config, rules, taxonomy):
        self.scenario = scenario
        self.config = config
        self.rules = rules if rules is not None else load_rules(config.rules_path)
        self.taxonomy = taxonomy if taxonomy is not None else load_taxonomy(config.taxonomy_path)
        self.registry = BackendRegistry()
        for spec in scenario.backends:
            if spec.kind in ("multimodal", "text"):
                self.registry.register(_reasoning_backend(spec))
        stt = scenario.backend("stt")
        self.stt = stt
        self.stt_latency = latency_from_spec(stt.latency) if stt else None
        rw = scenario.backend("rewrite")
        self.rewrite_latency = latency_from_spec(rw.latency) if rw else None
        self.book = LatencyBook(config.latency_buffer_size)
        self.frames = FrameBuffer(config.frame_buffer_size)
        self.session = SessionContext()
        self.state = PerceptionState()
        self.deferred: list = []
        self.busy_until = 0
        self.transcript: list = []
        self.traces: list = []
        self.passive = {"frames": 0, "processed": 0, "suspended": 0, "announcements": 0,
                        "deferred": 0}

    def say(self, t: int, kind: str, text: str, ref: str) -> None:
        self.transcript.append(TranscriptEntry(t, len(self.transcript), kind, text, ref))

    # -- passive ---------------------------------------------------------

    def on_frame(self, ev: FrameEvent) -> None:
        self.frames.push(ev.frame)
        self.passive["frames"] += 1
        if ev.t < self.busy_until:
            self.passive["suspended"] += 1
            return
        self.passive["processed"] += 1
        params = PermanenceParams.from_config(self.config)
        objects, self.state = process_frame(ev.frame, self.state, params, ev.t)
        people = []
        if SceneTask.FACE_RECOGNITION in scene_tasks(ev.frame.detections, self.config):
            faces = MockFaceBackend({ev.frame.frame_id: ev.faces})
            people, self.state = recognize_and_anchor(ev.frame, self.scenario.gallery, faces,
                                                      self.state, ev.t)
        pending = people + self.deferred + objects
        emitted, self.deferred, self.state = throttle(pending, self.state, params, ev.t)
        for a in emitted:
            self.say(ev.t, "announcement", a.text, f"frame:{ev.frame.frame_id}")
        self.passive["announcements"] += len(emitted)

    # -- active ----------------------------------------------------------

    def on_utterance(self, ev: UtteranceEvent) -> None:
        try:
            self.registry.first(Capability.MULTIMODAL)
            self.registry.first(Capability.TEXT_ONLY)
        except Exception:
            raise ScenarioError("utterances need one multimodal and one text backend") from None
        clock = VirtualClock(max(ev.t, self.busy_until))
        trace = ExecutionTrace(ev.interaction_id)

        text = ev.text
        if self.stt is not None:
            start = clock.now()
            text = ev.text if ev.text is not None else self.stt.transcripts[ev.audio]
            clock.spend(self.stt_latency.sample(text))
            trace = record_stage(trace, "stt", start, clock.now())

        age = ev.age or self.session.age_range
        if age is AgeRange.UNKNOWN:
            self.say(clock.now(), "prompt", AGE_PROMPT, ev.interaction_id)
            age = confirm_age(ev.age_answer or PromptAnswer.NO_ANSWER).range

        if age is AgeRange.UNDER_18:
            start = clock.now()
            decision = gate_query(text, age, self.taxonomy)
            trace = record_stage(trace, "gate", start, clock.now())
            trace = dataclasses.replace(trace, gate=decision.verdict)
            if not decision.forward:
                self.finish(clock, trace, "refusal", self.rules.refusal_message)
                return

        frame = self.frames.reserve(ev.t)
        fused = FusedInput(text, ev.t, frame, self.session)
        for b in self.registry:
            b.scripted = ev.reply
        rewrite_cost = self.rewrite_latency.sample if self.rewrite_latency else None
        final, trace = answer(fused, self.registry, self.book, self.config, self.rules,
                              clock=clock, trace=trace, rewrite_cost=rewrite_cost)
        for b in self.registry:
            b.scripted = None
        self.finish(clock, trace, "error" if trace.error else "response", final)

    def finish(self, clock, trace, kind: str, text: str) -> None:
        self.busy_until = clock.now()
        self.traces.append(trace)
        self.say(clock.now(), kind, text, trace.interaction_id)

    def run(self) -> tuple:
        for ev in self.scenario.events:
            if isinstance(ev, FrameEvent):
                self.on_frame(ev)
            elif isinstance(ev, UtteranceEvent):
                self.on_utterance(ev)
            elif isinstance(ev, ConfigEvent):
                self.config = self.config.with_overrides(ev.overrides)
            elif isinstance(ev, SessionEvent):
                self.session = SessionContext(ev.mode, ev.user, ev.age, ev.notes)
        self.passive["deferred"] = len(self.deferred)
        transcript = sorted(self.transcript, key=lambda e: (e.t, e.seq))
        report = report_from_traces(self.traces, self.passive)
        return transcript, report, list(self.traces)


def run_scenario(scenario: Scenario, config: Optional[Config] = None, rules=None,
                 taxonomy=None) -> tuple:
    """Replay ``scenario``; returns ``(transcript, MetricsReport, traces)``."""
    return _Replay(scenario, config or Config(), rules, taxonomy).run()


def dumps_outputs(transcript, report: MetricsReport, traces) -> tuple:
    """Byte-stable serializations of the three outputs."""
    from .metrics import traces_to_jsonl
    return transcript_to_jsonl(transcript), report.to_json(), traces_to_jsonl(traces)
