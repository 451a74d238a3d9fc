"""Synthetic experiment families run through the simulator.

Each experiment builds scenario records, replays them, and returns a
MetricsReport (with ``summary`` and ``correlations`` filled in) plus CSV
rows for plotting. Seeds come from ``params`` so results are repeatable.
"""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..core import Config, SightlineError
from ..safety import load_rules, normalize_quotes
from .latency_models import default_rarity_table
from .metrics import MetricsReport, pearson
from .runner import run_scenario
from .scenario import scenario_from_records

REFERENCE_STAGE_MS = {"stt": 1650, "reason": 5620, "rewrite": 1340}
REFERENCE_END_TO_END_MS = 8850
LENGTH_BUCKETS = (("short", 1, 5), ("medium", 6, 15), ("long", 16, 30))


class ExperimentError(SightlineError):
    pass


@dataclass
class ExperimentResult:
    name: str
    report: MetricsReport
    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _backend(name, kind, latency, **extra) -> dict:
    return {"type": "backend", "name": name, "kind": kind, "latency": latency, **extra}


def _adult_session() -> dict:
    return {"type": "session", "t": 0, "mode": "private", "user": "tester", "age": "over18"}


def _run(records, config):
    return run_scenario(scenario_from_records(records), config)


def _reason_ms(trace) -> int:
    stage = trace.stage("reason")
    return stage.duration if stage else 0


# ---------------------------------------------------------------------------


def latency_breakdown(params: dict, config: Config) -> ExperimentResult:
    n = int(params.get("n", 1000))
    stt = int(params.get("stt_ms", REFERENCE_STAGE_MS["stt"]))
    reason = int(params.get("reason_ms", REFERENCE_STAGE_MS["reason"]))
    rewrite = int(params.get("rewrite_ms", REFERENCE_STAGE_MS["rewrite"]))
    gap = stt + reason + rewrite + 1000
    records = [
        _backend("asr", "stt", stt),
        _backend("vlm", "multimodal", reason, responses={"default": "There is a chair to your left."}),
        _backend("llm", "text", reason, responses={"default": "There is a chair to your left."}),
        _backend("rw", "rewrite", rewrite),
        _adult_session(),
        {"type": "frame", "t": 0, "detections": [
            {"label": "chair", "confidence": 0.9, "bbox": [0.05, 0.5, 0.2, 0.3]}]},
    ]
    records += [{"type": "utterance", "t": 1 + i * gap, "text": "What is in front of me?"}
                for i in range(n)]
    _, report, traces = _run(records, config)
    rows = []
    for tr in traces:
        durations = {s.name: s.duration for s in tr.stages}
        rows.append([tr.interaction_id, durations.get("stt", 0), durations.get("route", 0),
                     durations.get("reason", 0), durations.get("rewrite", 0), sum(durations.values())])
    mean = report.end_to_end["mean"]
    modeled = stt + reason + rewrite
    report.summary = {
        "modeled_total_ms": modeled,
        "mean_total_ms": mean,
        "reference_end_to_end_ms": REFERENCE_END_TO_END_MS,
        "unmodeled_overhead_ms": REFERENCE_END_TO_END_MS - modeled,
    }
    report.notes.append(
        f"Stage means {stt}/{reason}/{rewrite} ms (speech to text, reasoning, rewrite) add up to "
        f"{modeled} ms. The measured end-to-end mean on real hardware was "
        f"{REFERENCE_END_TO_END_MS / 1000:.2f} s; the {REFERENCE_END_TO_END_MS - modeled} ms residual "
        "is overhead outside these stages and is not modeled here.")
    return ExperimentResult("latency_breakdown", report,
                            ["interaction", "stt_ms", "route_ms", "reason_ms", "rewrite_ms", "total_ms"], rows)


def _bucket(words: int) -> str:
    for name, lo, hi in LENGTH_BUCKETS:
        if lo <= words <= hi:
            return name
    return LENGTH_BUCKETS[-1][0]


def query_length(params: dict, config: Config) -> ExperimentResult:
    """Reasoning latency against question length.

    Latency follows the rarity of the question's words (plus noise) rather
    than its length, so longer questions are not proportionally slower.
    """
    n = int(params.get("n", 100))
    rng = np.random.default_rng(int(params.get("seed", 1)))
    table = default_rarity_table()
    vocab = sorted(table.words())
    records = [
        _backend("vlm", "multimodal",
                 {"model": "vocabulary", "base_ms": 4000, "k": 600, "noise_sd": 300,
                  "seed": int(params.get("seed", 1))}, latency_on="query"),
        _backend("llm", "text", 900),
        _adult_session(),
        {"type": "frame", "t": 0, "detections": []},
    ]
    lengths = []
    for i in range(n):
        _, lo, hi = LENGTH_BUCKETS[i % len(LENGTH_BUCKETS)]
        k = int(rng.integers(lo, hi + 1))
        words = [vocab[j] for j in rng.integers(0, len(vocab), size=k)]
        lengths.append(k)
        records.append({"type": "utterance", "t": 1 + i * 20000, "text": " ".join(words)})
    _, report, traces = _run(records, config)
    texts = [r["text"] for r in records if r["type"] == "utterance"]
    rarity = [table.text_rarity(t) for t in texts]
    latency = [_reason_ms(t) for t in traces]
    rows = [[tr.interaction_id, k, _bucket(k), round(r, 6), ms]
            for tr, k, r, ms in zip(traces, lengths, rarity, latency)]
    by_bucket = {}
    for name, _, _ in LENGTH_BUCKETS:
        vals = [ms for k, ms in zip(lengths, latency) if _bucket(k) == name]
        by_bucket[name] = {"count": len(vals), "mean_latency_ms": sum(vals) / len(vals) if vals else None}
    report.summary = {"buckets": by_bucket,
                      "bucket_bounds": {name: [lo, hi] for name, lo, hi in LENGTH_BUCKETS}}
    report.correlations = {"words_vs_latency": pearson(lengths, latency),
                           "rarity_vs_latency": pearson(rarity, latency)}
    report.notes.append("Length buckets are 1-5, 6-15 and 16+ words.")
    return ExperimentResult("query_length", report,
                            ["interaction", "words", "bucket", "mean_rarity", "reason_ms"], rows)


# ---------------------------------------------------------------------------
# guardrails


def load_corpus(path=None) -> list:
    if path is None:
        text = resources.files("sightline").joinpath("data/guardrails_corpus.jsonl").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    items = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            item = json.loads(line)
            if item["category"] not in ("offensive", "color", "vague"):
                raise ValueError(f"unknown category {item['category']!r}")
            str(item["id"]), str(item["response"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ExperimentError(f"corpus line {n}: {exc}") from None
        items.append(item)
    return items


_TOKEN = re.compile(r"[a-z]+")


def violations(text: str, rules) -> set:
    """Categories a response still violates, by plain substring and token checks.

    A vague answer counts as fixed only when it names a place; the generic
    "ask me to check" fallback still leaves the user without a location.
    """
    t = normalize_quotes(text).lower()
    found = set()
    if any(term in t for term in rules.offensive_terms):
        found.add("offensive")
    if set(_TOKEN.findall(t)) & set(rules.color_terms):
        found.add("color")
    for rule in rules.vague_phrases:
        if rule.phrase.lower() in t or normalize_quotes(rule.fallback).lower() in t:
            found.add("vague")
            break
    return found


def guardrails_impact(params: dict, config: Config) -> ExperimentResult:
    items = load_corpus(params.get("corpus"))
    rules = load_rules(config.rules_path)
    records = [
        _backend("vlm", "multimodal", 0),
        _backend("llm", "text", 0),
        _adult_session(),
    ]
    for i, item in enumerate(items):
        t = 1 + i * 1000
        records.append({"type": "frame", "t": t, "detections": item.get("scene") or []})
        records.append({"type": "utterance", "t": t + 1, "id": str(item["id"]),
                        "text": item.get("query") or "Where is it?", "reply": item["response"]})
    transcript, report, traces = _run(records, config)
    answers = {e.ref: e.text for e in transcript if e.kind in ("response", "error")}
    rules_by_id = {tr.interaction_id: tr.rewrites for tr in traces}
    rows, pre, post = [], {}, {}
    for item in items:
        cat, iid = item["category"], str(item["id"])
        before = cat in violations(item["response"], rules)
        after = cat in violations(answers[iid], rules)
        pre[cat] = pre.get(cat, 0) + before
        post[cat] = post.get(cat, 0) + after
        rows.append([iid, cat, int(before), int(after), ";".join(rules_by_id[iid]), answers[iid]])
    report.summary = {"pre_rewrite_violations": pre, "post_rewrite_violations": post,
                      "pre_total": sum(pre.values()), "post_total": sum(post.values()),
                      "items": len(items)}
    return ExperimentResult("guardrails_impact", report,
                            ["item", "category", "violation_before", "violation_after", "rules", "answer"],
                            rows)


# ---------------------------------------------------------------------------
# correlation studies


def image_complexity(params: dict, config: Config) -> ExperimentResult:
    """Object count in the frame against reasoning latency drawn independently of it."""
    n = int(params.get("n", 100))
    seed = int(params.get("seed", 1))
    max_objects = int(params.get("max_objects", 20))
    rng = np.random.default_rng(seed)
    latency = params.get("latency", {"model": "gaussian", "mean": 5620, "sd": 400, "seed": seed})
    records = [_backend("vlm", "multimodal", latency), _backend("llm", "text", 900), _adult_session()]
    counts = []
    labels = ("chair", "table", "cup", "book", "bottle", "person", "plant", "laptop")
    for i in range(n):
        k = i % max_objects + 1
        counts.append(k)
        dets = []
        for _ in range(k):
            w, h = rng.uniform(0.05, 0.3, size=2)
            x, y = rng.uniform(0, 1 - w), rng.uniform(0, 1 - h)
            dets.append({"label": labels[int(rng.integers(len(labels)))], "confidence": 0.9,
                         "bbox": [float(x), float(y), float(w), float(h)]})
        t = 1 + i * 20000
        records.append({"type": "frame", "t": t, "detections": dets})
        records.append({"type": "utterance", "t": t + 1, "text": "What is in front of me?"})
    _, report, traces = _run(records, config)
    lat = [_reason_ms(t) for t in traces]
    r = pearson(counts, lat)
    report.correlations = {"objects_vs_latency": r}
    if r is None:
        report.notes.append("Latency has no variance, so the correlation is undefined.")
    rows = [[tr.interaction_id, k, ms] for tr, k, ms in zip(traces, counts, lat)]
    return ExperimentResult("image_complexity", report, ["interaction", "objects", "reason_ms"], rows)


def vocab_popularity(params: dict, config: Config) -> ExperimentResult:
    """Rarity of the answer's words against reasoning latency."""
    n = int(params.get("n", 100))
    seed = int(params.get("seed", 1))
    words_per_reply = int(params.get("words", 8))
    rng = np.random.default_rng(seed)
    table = default_rarity_table()
    vocab = sorted(table.words(), key=lambda w: (table.word_rarity(w), w))
    latency = params.get("latency", {"model": "vocabulary", "base_ms": 3000, "k": 800,
                                     "noise_sd": 400, "seed": seed})
    records = [_backend("vlm", "multimodal", latency), _backend("llm", "text", 900), _adult_session(),
               {"type": "frame", "t": 0, "detections": []}]
    replies = []
    window = max(1, len(vocab) // 10)
    for i in range(n):
        lo = int(rng.integers(0, len(vocab) - window))
        reply = " ".join(vocab[lo + int(j)] for j in rng.integers(0, window, size=words_per_reply))
        replies.append(reply)
        records.append({"type": "utterance", "t": 1 + i * 20000, "text": "What do you see?",
                        "reply": reply})
    _, report, traces = _run(records, config)
    rarity = [table.text_rarity(r) for r in replies]
    lat = [_reason_ms(t) for t in traces]
    report.correlations = {"rarity_vs_latency": pearson(rarity, lat)}
    rows = [[tr.interaction_id, round(r, 6), ms] for tr, r, ms in zip(traces, rarity, lat)]
    return ExperimentResult("vocab_popularity", report, ["interaction", "mean_rarity", "reason_ms"], rows)


EXPERIMENTS = {
    "latency_breakdown": latency_breakdown,
    "query_length": query_length,
    "guardrails_impact": guardrails_impact,
    "image_complexity": image_complexity,
    "vocab_popularity": vocab_popularity,
}


def run_experiment(name: str, params=None, config=None) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ExperimentError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}") from None
    return fn(dict(params or {}), config or Config())
