import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sightline.cognition import (
    BACKEND_FAILURE_MESSAGE,
    EMPTY_SCENE,
    BackendError,
    BackendRegistry,
    Capability,
    FrameBuffer,
    LatencyBook,
    LatencyStats,
    MockBackend,
    PromptError,
    answer,
    build_prompt,
    reserve_frame,
    scene_to_text,
    select_path,
    update_latency,
)
from sightline.core import (
    Config,
    Detection,
    DetectionSet,
    ExecutionPath,
    Frame,
    FusedInput,
    Mode,
    SessionContext,
    VirtualClock,
    is_sequential,
    total_latency,
)
from sightline.safety import rewrite_response
from sightline.spatial import zones


def det(label, x, y, w, h, conf=0.9):
    return Detection(label, conf, (x, y, w, h))


def registry(mm_latency=5620, text_latency=1200, mm_reply="The cup is on the table.",
             text_reply="The cup is on the table."):
    mm = MockBackend("vision", Capability.MULTIMODAL, {"default": mm_reply},
                     latency=lambda q, r: mm_latency)
    tx = MockBackend("text", Capability.TEXT_ONLY, {"default": text_reply},
                     latency=lambda q, r: text_latency)
    return BackendRegistry([mm, tx]), mm, tx


def scene_frame(t=0):
    return Frame(1, t, 640, 480, None, DetectionSet((det("cup", 0.7, 0.5, 0.1, 0.1),
                                                    det("table", 0.1, 0.5, 0.8, 0.4))))


# -- latency -----------------------------------------------------------------


def test_update_latency_examples():
    s = update_latency(LatencyStats(), 5620, 0.3)
    assert s.ewma == 5620 and s.sample_count == 1
    s = update_latency(LatencyStats(ewma=4000, samples=(4000,), sample_count=1), 6000, 0.5)
    assert s.ewma == 5000
    s = LatencyStats()
    for v in (100, 900, 40):
        s = update_latency(s, v, 1.0)
        assert s.ewma == v


def test_update_latency_rejects_bad_input():
    with pytest.raises(ValueError):
        update_latency(LatencyStats(), -1, 0.5)
    with pytest.raises(ValueError):
        update_latency(LatencyStats(), 1, 0.0)
    with pytest.raises(ValueError):
        update_latency(LatencyStats(), 1, 1.5)


def test_ring_buffer_is_bounded():
    s = LatencyStats(capacity=4)
    for v in range(10):
        s = update_latency(s, v, 0.5)
    assert s.samples == (6, 7, 8, 9) and s.sample_count == 10


def test_select_path_examples():
    assert select_path(LatencyStats(ewma=6000), 5000) is ExecutionPath.TEXT_FALLBACK
    assert select_path(LatencyStats(ewma=5000), 5000) is ExecutionPath.MULTIMODAL
    assert select_path(LatencyStats(), 1) is ExecutionPath.MULTIMODAL
    with pytest.raises(ValueError):
        select_path(LatencyStats(), 0)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=60),
       st.floats(0.01, 1.0))
def test_ewma_stays_within_sample_range(samples, alpha):
    s = LatencyStats()
    for v in samples:
        s = update_latency(s, v, alpha)
    assert min(samples) - 1e-6 <= s.ewma <= max(samples) + 1e-6


@given(st.lists(st.integers(0, 20000), max_size=40), st.integers(1, 20000))
def test_path_depends_only_on_history(samples, threshold):
    def replay():
        s, paths = LatencyStats(), []
        for v in samples:
            paths.append(select_path(s, threshold))
            s = update_latency(s, v, 0.3)
        return paths
    assert replay() == replay()


# -- frames and scenes --------------------------------------------------------


def test_reserve_frame_examples():
    frames = [Frame(i, t) for i, t in enumerate((0, 1000, 2000))]
    assert reserve_frame(frames, 1400).timestamp == 1000
    assert reserve_frame(frames, 0).timestamp == 0
    assert reserve_frame([], 500) is None
    assert reserve_frame(frames[1:], 500) is None


def test_frame_buffer_orders_and_bounds():
    buf = FrameBuffer(maxlen=2)
    for i, t in enumerate((0, 10, 20)):
        buf.push(Frame(i, t))
    assert len(buf) == 2
    assert buf.reserve(5) is None
    assert buf.reserve(15).frame_id == 1
    with pytest.raises(ValueError):
        buf.push(Frame(9, 20))


def test_scene_to_text_examples():
    assert scene_to_text(DetectionSet()).text == EMPTY_SCENE
    one = scene_to_text(DetectionSet((det("person", 0.3, 0.3, 0.4, 0.5),)))
    assert one.text == "A person is near, in front of you."
    assert one.object_positions == {"person": ("center", "near")}
    many = scene_to_text(DetectionSet((det("chair", 0.0, 0.5, 0.1, 0.1), det("chair", 0.15, 0.5, 0.1, 0.1),
                                       det("table", 0.8, 0.5, 0.15, 0.2))))
    assert many.text == "Two chairs are to your left. A table is to your right."


labels = st.sampled_from(["chair", "table", "cup", "person", "dog"])


@st.composite
def detections(draw):
    items = []
    for _ in range(draw(st.integers(0, 8))):
        w = draw(st.floats(0.01, 0.5))
        h = draw(st.floats(0.01, 0.5))
        x = draw(st.floats(0, 1 - w))
        y = draw(st.floats(0, 1 - h))
        items.append(Detection(draw(labels), draw(st.floats(0, 1)), (x, y, w, h)))
    return DetectionSet(tuple(items))


@given(detections())
def test_scene_mentions_only_detected_labels(ds):
    desc = scene_to_text(ds)
    present = set(ds.labels())
    assert set(desc.object_positions) == present
    groups = {(*zones(d), d.label) for d in ds}
    assert len(desc.sentences) == max(1, len(groups))
    for label in {"chair", "table", "cup", "person", "dog"} - present:
        assert label not in desc.text.lower()
        assert label + "s" not in desc.text.lower()


# -- prompts -----------------------------------------------------------------


def test_prompt_paths():
    frame = scene_frame()
    fused = FusedInput("where is my cup?", 100, frame)
    p = build_prompt(fused, ExecutionPath.MULTIMODAL)
    assert p.scene_text is None and p.frame_id == frame.frame_id
    assert "rephrase them in simple words" in p.system_instructions
    scene = scene_to_text(frame.detections)
    p = build_prompt(fused, ExecutionPath.TEXT_FALLBACK, scene)
    for sentence in scene.sentences:
        assert sentence in p.render()
    assert "rephrase them in simple words" in p.system_instructions
    with pytest.raises(PromptError):
        build_prompt(fused, ExecutionPath.TEXT_FALLBACK)


# -- answer ------------------------------------------------------------------


def test_answer_multimodal_path(rules):
    reg, mm, tx = registry()
    book = LatencyBook()
    clock = VirtualClock()
    text, trace = answer(FusedInput("where is my cup?", 100, scene_frame()), reg, book, Config(), rules,
                         clock=clock)
    assert trace.path is ExecutionPath.MULTIMODAL and trace.backend == "vision"
    assert total_latency(trace) == 5620 == sum(s.duration for s in trace.stages)
    assert trace.stage_names() == ["route", "reason", "rewrite"] and is_sequential(trace)
    assert book.get("vision").ewma == 5620
    assert len(mm.calls) == 1 and not tx.calls
    assert text == "The cup is on the table."


def test_answer_forced_fallback(rules):
    reg, mm, tx = registry()
    book = LatencyBook()
    book.force("vision", 12000)
    text, trace = answer(FusedInput("where is my cup?", 100, scene_frame()), reg, book, Config(), rules,
                         clock=VirtualClock())
    assert trace.path is ExecutionPath.TEXT_FALLBACK and trace.backend == "text"
    assert not mm.calls and len(tx.calls) == 1
    prompt, frame = tx.calls[0]
    assert frame is None and "cup" in prompt.scene_text


def test_answer_frameless_uses_environment_notes(rules):
    reg, mm, tx = registry()
    session = SessionContext(Mode.PUBLIC, environment_notes="Exhibit 4 is next to the entrance.")
    text, trace = answer(FusedInput("where is exhibit 4?", 0, None, session), reg, LatencyBook(), Config(),
                         rules, clock=VirtualClock())
    assert trace.path is ExecutionPath.TEXT_FALLBACK
    assert tx.calls[0][0].scene_text == "Exhibit 4 is next to the entrance."
    assert not mm.calls


def test_answer_backend_failure_keeps_trace(rules):
    reg, mm, tx = registry()
    mm.fail = True
    text, trace = answer(FusedInput("hi", 0, scene_frame()), reg, LatencyBook(), Config(), rules,
                         clock=VirtualClock())
    assert text == BACKEND_FAILURE_MESSAGE
    assert trace.error and trace.stage_names() == ["route", "reason"]


def test_text_only_backend_rejects_frames():
    tx = MockBackend("text", Capability.TEXT_ONLY)
    from sightline.cognition import Prompt
    with pytest.raises(BackendError):
        tx.invoke(Prompt("", "q"), scene_frame())


def test_registry_errors():
    reg, _, _ = registry()
    with pytest.raises(BackendError):
        reg.register(MockBackend("vision", Capability.MULTIMODAL))
    with pytest.raises(BackendError):
        reg.get("nope")
    with pytest.raises(BackendError):
        BackendRegistry().first(Capability.MULTIMODAL)


replies = st.sampled_from([
    "As you can see, the red cup is over there.", "The blue box is on the left.",
    "It's over there.", "You're blind as a bat.", "The door is open.", "The background is grey.",
])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(replies, st.integers(0, 20000), st.booleans()), min_size=1, max_size=12))
def test_answer_properties(rules, script):
    reg, mm, tx = registry()
    book = LatencyBook()
    clock = VirtualClock()
    for raw, latency, with_frame in script:
        mm.responses = tx.responses = {"default": raw}
        mm.latency = tx.latency = lambda q, r, v=latency: v
        frame = scene_frame(clock.now()) if with_frame else None
        before_mm = len(mm.calls)
        text, trace = answer(FusedInput("where is my cup?", clock.now(), frame), reg, book, Config(),
                             rules, clock=clock)
        # final text is always the rewrite of the raw reply
        scene = frame.detections if frame else None
        assert text == rewrite_response(raw, rules, scene, query="where is my cup?").text
        assert trace.stage_names() == ["route", "reason", "rewrite"]
        assert all(s.duration >= 0 for s in trace.stages) and is_sequential(trace)
        if trace.path is ExecutionPath.TEXT_FALLBACK:
            assert len(mm.calls) == before_mm
