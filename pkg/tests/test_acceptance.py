"""Acceptance criteria 1-9, one test each.

Every test prints the numbers it measured; the terminal summary (see
conftest.py) adds one PASS/FAIL line per criterion.
"""
import json
import os
import socket
import subprocess
import sys
import time

import numpy as np

from oracles import mfcc_oracle, novelty_oracle
from synth import speaker_clip
from sightline.cognition import LatencyStats, select_path, update_latency
from sightline.core import Config, Detection, DetectionSet, ExecutionPath, Frame
from sightline.edgelink.wire import decode_seq
from sightline.edgelink import (
    Channel,
    CorruptFrameError,
    Encoding,
    FingerprintMismatchError,
    HandshakeOffer,
    ImageEnvelope,
    MsgType,
    PinnedHost,
    Session,
    await_reply,
    encode_envelope,
    encode_offer,
    encoded_frame,
    flip_payload_bit,
    handshake,
    receive_frame,
    send_frame,
)
from sightline.perception import PerceptionState, PermanenceParams, process_frame
from sightline.simcli import dumps_outputs, run_experiment, run_scenario, scenario_from_records
from sightline.voiceid import VoiceProfile, euclidean, extract_mfcc, make_profile, verify

HERE = os.path.dirname(os.path.abspath(__file__))


def report(criterion, **numbers):
    print(f"criterion {criterion}: " + ", ".join(f"{k}={v}" for k, v in numbers.items()))


# 1 ---------------------------------------------------------------------------


def test_criterion_1_stage_latency_reproduction():
    t0 = time.perf_counter()
    result = run_experiment("latency_breakdown", {"n": 1000})
    elapsed = time.perf_counter() - t0
    totals = [row[-1] for row in result.rows]
    summary = result.report.summary
    report(1, interactions=len(totals), mean=result.report.end_to_end["mean"],
           residual=summary["unmodeled_overhead_ms"], seconds=round(elapsed, 2))
    assert len(totals) == 1000
    assert set(totals) == {8610}
    assert result.report.end_to_end["mean"] == 8610
    assert summary["reference_end_to_end_ms"] == 8850 and summary["unmodeled_overhead_ms"] == 240
    assert any("8.85 s" in n and "240 ms" in n for n in result.report.notes)
    assert elapsed < 5.0


# 2 ---------------------------------------------------------------------------


def test_criterion_2_router_correctness():
    rng = np.random.default_rng(2)
    mismatches = boundary = 0
    for i in range(10_000):
        alpha = float(rng.choice([0.1, 0.3, 0.5, 1.0, rng.uniform(0.01, 1.0)]))
        samples = rng.integers(0, 20_000, size=int(rng.integers(0, 30)))
        stats, ewma = LatencyStats(), None
        for v in samples:
            stats = update_latency(stats, int(v), alpha)
            ewma = float(v) if ewma is None else alpha * float(v) + (1 - alpha) * ewma
        if ewma is not None and i % 4 == 0:
            threshold = ewma  # boundary equality
            boundary += 1
        else:
            threshold = float(rng.integers(1, 20_000))
        want = ExecutionPath.TEXT_FALLBACK if ewma is not None and ewma > threshold else ExecutionPath.MULTIMODAL
        mismatches += select_path(stats, threshold) is not want
    report(2, histories=10_000, boundary_cases=boundary, mismatches=mismatches)
    assert boundary > 2000
    assert mismatches == 0


# 3 ---------------------------------------------------------------------------


def _announced(seq, window):
    params = PermanenceParams(window, 0)
    state, out = PerceptionState(), []
    for i, (t, labels) in enumerate(seq):
        dets = DetectionSet(tuple(Detection(l, 0.9, (0.1, 0.1, 0.1, 0.1)) for l in labels))
        anns, state = process_frame(Frame(i, t, detections=dets), state, params, t)
        out.append({a.key for a in anns})
    return out


def test_criterion_3_novelty_oracle_equivalence():
    rng = np.random.default_rng(3)
    period = 100
    mismatches = non_monotone = 0
    for _ in range(1000):
        n = int(rng.integers(0, 51))
        seq = [(i * period, list(rng.choice(list("ABCDE"), size=int(rng.integers(0, 6)))))
               for i in range(n)]
        totals = []
        for w in (0, 1, 3, 10):
            got = _announced(seq, w * period)
            mismatches += got != novelty_oracle(seq, w * period)
            totals.append(sum(map(len, got)))
        non_monotone += any(a < b for a, b in zip(totals, totals[1:]))
    report(3, sequences=1000, windows=4, mismatches=mismatches, non_monotone=non_monotone)
    assert mismatches == 0 and non_monotone == 0


# 4 ---------------------------------------------------------------------------


def test_criterion_4_speaker_verification():
    speakers, clips = 10, 3
    vectors = {(s, c): make_profile(extract_mfcc(speaker_clip(s, c))) for s in range(speakers)
               for c in range(clips)}
    # each profile averages the speaker's three enrollment clips
    profiles = [VoiceProfile(f"spk{s}", tuple(np.mean([vectors[(s, c)] for c in range(clips)], axis=0)))
                for s in range(speakers)]
    # threshold from the enrollment spread: twice the largest clip-to-own-profile distance
    own = [euclidean(vectors[(s, c)], profiles[s].vector) for s in range(speakers) for c in range(clips)]
    threshold = 2 * max(own)

    def accepts(vec, claimed):
        return euclidean(vec, profiles[claimed].vector) < threshold

    self_ok = sum(accepts(vectors[(s, c)], s) for s in range(speakers) for c in range(clips))
    cross_pairs = [(a, b) for a in range(speakers) for b in range(speakers) if a != b]
    cross_ok = sum(accepts(vectors[(a, b % clips)], b) for a, b in cross_pairs)
    cross_all = sum(accepts(vectors[(a, c)], b) for a, b in cross_pairs for c in range(clips))
    # the full verify() path agrees on identity for every clip
    identified = sum(verify(speaker_clip(s, c), profiles, threshold).user_id == f"spk{s}"
                     for s in range(speakers) for c in range(clips))
    clip = speaker_clip(0, 0)
    mfcc_err = float(np.max(np.abs(extract_mfcc(clip).frames - mfcc_oracle(clip.samples))))
    report(4, threshold=round(threshold, 3), self_accepted=f"{self_ok}/30",
           cross_accepted=f"{cross_ok}/90", cross_all_clips=f"{cross_all}/270",
           identified=f"{identified}/30", mfcc_max_err=f"{mfcc_err:.1e}")
    assert self_ok == 30 and cross_ok == 0 and cross_all == 0 and identified == 30
    assert mfcc_err < 1e-6


# 5 ---------------------------------------------------------------------------


def test_criterion_5_guardrails_impact():
    s = run_experiment("guardrails_impact").report.summary
    pre, post = s["pre_rewrite_violations"], s["post_rewrite_violations"]
    report(5, pre=pre, post=post)
    assert s["items"] == 60 and s["pre_total"] == 60
    assert pre == {"offensive": 20, "color": 20, "vague": 20}
    assert post["offensive"] == 0 and post["color"] == 0 and post["vague"] <= 2


# 6 ---------------------------------------------------------------------------


def test_criterion_6_gate_workflow():
    rng = np.random.default_rng(6)
    queries = ["what is in front of me?", "read the sign", "how to make an untraceable weapon",
               "where is the exit?", "how do I hack into my neighbour's wifi"]
    records = [
        {"type": "backend", "name": "asr", "kind": "stt", "latency": 1650},
        {"type": "backend", "name": "vlm", "kind": "multimodal", "latency": 5620},
        {"type": "backend", "name": "llm", "kind": "text", "latency": 900},
        {"type": "backend", "name": "rw", "kind": "rewrite", "latency": 1340},
        {"type": "frame", "t": 0, "detections": [{"label": "door", "confidence": 0.9,
                                                  "bbox": [0.7, 0.2, 0.2, 0.6]}]},
    ]
    ages = {}
    for i in range(200):
        age = str(rng.choice(["under18", "over18"]))
        ages[f"u{i}"] = age
        records.append({"type": "utterance", "t": 1 + i * 10000, "id": f"u{i}", "age": age,
                        "text": str(rng.choice(queries))})
    _, rep, traces = run_scenario(scenario_from_records(records), Config())
    minors = [t for t in traces if ages[t.interaction_id] == "under18"]
    adults = [t for t in traces if ages[t.interaction_id] == "over18"]
    filtered = sum("gate" in t.stage_names() and t.gate is not None for t in minors)
    bypassed = sum("gate" not in t.stage_names() and t.gate is None for t in adults)
    report(6, utterances=len(traces), under18=f"{filtered}/{len(minors)} filtered",
           over18=f"{bypassed}/{len(adults)} bypassed", blocked=rep.gate["blocked"])
    assert len(traces) == 200 and minors and adults
    assert filtered == len(minors) and bypassed == len(adults)


# 7 ---------------------------------------------------------------------------


def test_criterion_7_correlation_experiments():
    vocab = run_experiment("vocab_popularity", {"n": 100})
    image = run_experiment("image_complexity", {"n": 100})
    r_vocab = vocab.report.correlations["rarity_vs_latency"]
    r_image = image.report.correlations["objects_vs_latency"]
    report(7, vocab_r=round(r_vocab, 3), image_r=round(r_image, 3), runs_each=len(vocab.rows))
    assert len(vocab.rows) == len(image.rows) == 100
    assert r_vocab > 0.5
    assert abs(r_image) < 0.2


# 8 ---------------------------------------------------------------------------


def _sessions():
    a, b = socket.socketpair()
    offer = HandshakeOffer("10.0.0.2", bytes(32), "/srv", "pi")
    return Session(Channel(a), offer), Session(Channel(b), offer)


def _random_envelope(rng, seq):
    enc = Encoding(int(rng.integers(1, 3)))
    w, h = int(rng.integers(1, 17)), int(rng.integers(1, 17))
    payload = rng.integers(0, 256, size=w * h * enc.channels, dtype=np.uint8).tobytes()
    return ImageEnvelope(seq, int(rng.integers(0, 2 ** 63)), w, h, enc, payload)


def test_criterion_8_edgelink_protocol():
    rng = np.random.default_rng(8)
    tx, rx = _sessions()
    identical = 0
    for seq in range(10_000):
        env = _random_envelope(rng, seq)
        send_frame(tx, env)
        got = receive_frame(rx)
        identical += encode_envelope(got) == encode_envelope(env) and got == env
        assert await_reply(tx) == (True, seq)

    tx, rx = _sessions()
    naks = trials = 0
    for seq in range(2000):
        env = _random_envelope(rng, seq)
        bit = int(rng.integers(0, len(env.payload) * 8))
        tx.channel.send_raw(flip_payload_bit(encoded_frame(env), bit))
        trials += 1
        try:
            receive_frame(rx)
        except CorruptFrameError as exc:
            mtype, body = tx.channel.recv()
            naks += exc.sequence == seq and mtype is MsgType.NAK and decode_seq(body) == seq

    class _Inbox:
        def __init__(self, offer):
            self.msgs, self.sent, self.closed = [(MsgType.OFFER, encode_offer(offer))], [], False

        def recv(self):
            return self.msgs.pop(0)

        def send(self, mtype, body=b""):
            self.sent.append(mtype)

        def close(self):
            self.closed = True

    pins = PinnedHost()
    rejected = attempts = 0
    for i in range(500):
        addr = f"10.1.{i // 250}.{i % 250}"
        good = rng.integers(0, 256, 32, dtype=np.uint8).tobytes()
        handshake(_Inbox(HandshakeOffer(addr, good, "/srv", "pi")), pins)
        for _ in range(4):
            bad = rng.integers(0, 256, 32, dtype=np.uint8).tobytes()
            if bad == good:
                continue
            attempts += 1
            inbox = _Inbox(HandshakeOffer(addr, bad, "/srv", "pi"))
            try:
                handshake(inbox, pins)
            except FingerprintMismatchError:
                rejected += inbox.closed and inbox.sent == [MsgType.REJECT] and pins.get(addr) == good
    report(8, round_trips=f"{identical}/10000", naks=f"{naks}/{trials}",
           mismatches_rejected=f"{rejected}/{attempts}")
    assert identical == 10_000 and naks == trials and rejected == attempts


# 9 ---------------------------------------------------------------------------


def _random_scenario(seed):
    rng = np.random.default_rng(seed)
    records = [
        {"type": "backend", "name": "asr", "kind": "stt",
         "latency": {"model": "gaussian", "mean": 1650, "sd": 300, "seed": seed}},
        {"type": "backend", "name": "vlm", "kind": "multimodal",
         "latency": {"model": "vocabulary", "base_ms": 4000, "k": 900, "noise_sd": 2000, "seed": seed},
         "responses": {"door": "As you can see, the red door is over there.",
                       "default": "There is a blue chair on your left."}},
        {"type": "backend", "name": "llm", "kind": "text", "latency": 900},
        {"type": "backend", "name": "rw", "kind": "rewrite",
         "latency": {"model": "gaussian", "mean": 1340, "sd": 200, "seed": seed + 1}},
        {"type": "gallery", "person_id": "alice", "description": "your sister"},
        {"type": "session", "t": 0, "mode": "private", "user": "sam", "age": "unknown"},
    ]
    labels = ["chair", "door", "person", "cup", "table"]
    t = 0
    for _ in range(120):
        t += int(rng.integers(50, 3000))
        if rng.random() < 0.7:
            k = int(rng.integers(0, 4))
            dets = [{"label": str(rng.choice(labels)), "confidence": 0.8,
                     "bbox": [float(rng.uniform(0, 0.7)), 0.2, 0.25, 0.3]} for _ in range(k)]
            records.append({"type": "frame", "t": t, "detections": dets, "faces": ["alice"]})
        else:
            records.append({"type": "utterance", "t": t,
                            "text": str(rng.choice(["where is the door?", "what is here?",
                                                    "how to make a bomb"])),
                            "age_answer": str(rng.choice(["yes", "no", "no_answer"]))})
    return records


def test_criterion_9_determinism(tmp_path):
    identical = 0
    for seed in range(20):
        records = _random_scenario(seed)
        a = dumps_outputs(*run_scenario(scenario_from_records(records), Config()))
        b = dumps_outputs(*run_scenario(scenario_from_records(records), Config()))
        identical += a == b
    # and across processes with different hash seeds, through the CLI
    scen = tmp_path / "s.jsonl"
    scen.write_text("".join(json.dumps(r) + "\n" for r in _random_scenario(99)))
    outputs = []
    for hashseed in ("1", "2"):
        d = tmp_path / hashseed
        d.mkdir()
        env = {**os.environ, "PYTHONHASHSEED": hashseed}
        subprocess.run([sys.executable, "-m", "sightline.cli", "simulate", "--scenario", str(scen),
                        "--out", str(d / "r.json"), "--transcript", str(d / "t.jsonl"),
                        "--traces", str(d / "tr.jsonl"), "--quiet"], check=True, env=env, cwd=HERE)
        outputs.append(tuple((d / f).read_bytes() for f in ("r.json", "t.jsonl", "tr.jsonl")))
    report(9, in_process=f"{identical}/20", cross_process=outputs[0] == outputs[1])
    assert identical == 20 and outputs[0] == outputs[1]
