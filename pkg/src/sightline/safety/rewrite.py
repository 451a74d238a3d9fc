"""Ordered rewrite passes that make a reasoning-engine answer usable without sight.

Passes run in a fixed order:

1. offensive terms: any hit replaces the whole answer with the refusal message;
2. visual assumptions: phrases such as "as you can see" are removed;
3. colors: color words are removed, and sentences about background colors or
   left empty by the removal are dropped;
4. vague phrases: "it's over there" and friends are replaced with a position
   taken from the scene when one is available, else with a request for a
   direction.

Each change is recorded as ``(rule_id, (start, end))``, with offsets into the
text as it stood when that pass began.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..core import DetectionSet
from ..spatial import (
    DIRECTION_PHRASES,
    NEAR_AREA_DEFAULT,
    capitalize_first,
    pluralize,
    position_phrase,
    zones,
)
from .rules import (
    COLOR_RULE,
    COLOR_SENTENCE_RULE,
    OFFENSIVE_RULE,
    VISUAL_RULE,
    RuleSet,
    normalize_quotes,
    phrase_regex,
)


@dataclass(frozen=True)
class RewriteResult:
    text: str
    applied: tuple = ()
    blocked: bool = False

    @property
    def rule_ids(self) -> list:
        return [rule_id for rule_id, _ in self.applied]


# said when every sentence of the answer depended on sight
NOTHING_LEFT_MESSAGE = ("I can't describe that without relying on sight. "
                        "Ask me about its shape, size, or position instead.")

_SPLIT = re.compile(r"((?<=[.!?])\s+)")
_DANGLING_TAIL = frozenset(
    "is are was were be been being look looks looked appear appears seem seems painted "
    "colored coloured in of with and or a an the it's its that's mostly all very".split()
)
_WORD = re.compile(r"[\w']+")


def _split(text: str) -> list:
    """[(sentence, trailing_separator), ...]; joining them gives back ``text``."""
    parts = _SPLIT.split(text)
    parts.append("")
    return [(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]


def _join(pieces: list, original: str) -> str:
    out = "".join(s + sep for s, sep in pieces)
    return out if original[-1:].isspace() else out.rstrip()


def _fix_article(match: re.Match) -> str:
    art, word = match.group(1), match.group(2)
    want = "an" if word[0].lower() in "aeiou" else "a"
    if art[0].isupper():
        want = want.capitalize()
    return f"{want} {word}"


def _tidy(sentence: str, capitalize: bool) -> str:
    s = re.sub(r"\s+", " ", sentence)
    s = re.sub(r"\s+([,.;:!?])", r"\1", s)
    s = re.sub(r",(\s*,)+", ",", s)
    s = re.sub(r",\s*([.;:!?])", r"\1", s)
    s = re.sub(r"^[\s,;:]+", "", s)
    s = re.sub(r"\b([Aa]n?) (\w+)", _fix_article, s)
    s = s.strip()
    return capitalize_first(s) if capitalize else s


def _starts_upper(sentence: str) -> bool:
    for ch in sentence:
        if ch.isalpha():
            return ch.isupper()
    return False


def _remove_spans(sentence: str, spans: list) -> str:
    out = sentence
    for start, end in sorted(spans, reverse=True):
        out = out[:start] + " " + out[end:]
    return out


def _has_words(sentence: str) -> bool:
    return bool(_WORD.search(sentence))


def _greedy(matches: list) -> list:
    """Non-overlapping matches, earliest first, longest at equal start."""
    chosen, last_end = [], -1
    for m in sorted(matches, key=lambda m: (m[0], -(m[1] - m[0]), m[2])):
        if m[0] >= last_end:
            chosen.append(m)
            last_end = m[1]
    return chosen


# ---------------------------------------------------------------------------
# passes


def _visual_pass(text: str, rules: RuleSet, applied: list) -> str:
    pattern = rules.pattern("visual")
    if pattern is None:
        return text
    pieces, offset = [], 0
    for sentence, sep in _split(text):
        base = offset
        offset += len(sentence) + len(sep)
        spans = [(m.start(), m.end()) for m in pattern.finditer(sentence)]
        if spans:
            applied.extend((VISUAL_RULE, (base + a, base + b)) for a, b in spans)
            sentence = _tidy(_remove_spans(sentence, spans), _starts_upper(sentence))
            if not _has_words(sentence):
                continue
        pieces.append((sentence, sep))
    return _rebuild(text, pieces)


def _rebuild(original: str, pieces: list) -> str:
    kept = [(s, sep) for s, sep in pieces if s]
    return _join(kept, original) if kept else ""


def _color_pass(text: str, rules: RuleSet, applied: list) -> str:
    run, word, background = rules.pattern("color_run"), rules.pattern("color_word"), rules.pattern("background")
    if run is None:
        return text
    pieces, offset = [], 0
    for sentence, sep in _split(text):
        base = offset
        offset += len(sentence) + len(sep)
        spans = [(m.start(), m.end()) for m in run.finditer(sentence)]
        if not spans:
            pieces.append((sentence, sep))
            continue
        if background is not None and background.search(sentence) and word.search(sentence):
            applied.append((COLOR_SENTENCE_RULE, (base, base + len(sentence))))
            continue
        cleaned = _tidy(_remove_spans(sentence, spans), _starts_upper(sentence))
        words = _WORD.findall(cleaned)
        if len(words) < 2 or words[-1].lower() in _DANGLING_TAIL:
            applied.append((COLOR_SENTENCE_RULE, (base, base + len(sentence))))
            continue
        applied.extend((COLOR_RULE, (base + a, base + b)) for a, b in spans)
        pieces.append((cleaned, sep))
    return _rebuild(text, pieces)


def _mentioned(scene: DetectionSet, text: Optional[str]) -> list:
    if not text:
        return []
    out = []
    for det in scene:
        pattern = phrase_regex([det.label, pluralize(det.label)])
        if pattern is not None and pattern.search(text):
            out.append(det)
    return out


def _ground(text: str, scene: Optional[DetectionSet], query: Optional[str] = None):
    """Pick the detection a vague phrase most likely refers to.

    Objects named in the question win, then objects named in the answer,
    then everything in view; confidence breaks ties, then label order.
    """
    if scene is None or len(scene) == 0:
        return None
    pool = _mentioned(scene, query) or _mentioned(scene, text) or list(scene)
    return min(pool, key=lambda d: (-d.confidence, d.label))


def _vague_pass(text: str, rules: RuleSet, scene: Optional[DetectionSet], applied: list,
                near_area: float, query: Optional[str]) -> str:
    compiled = rules.pattern("vague")
    if not compiled:
        return text
    target = _ground(text, scene, query)
    if target is not None:
        h, d = zones(target, near_area)
        fill = {"label": target.label, "position": position_phrase(h, d),
                "direction": DIRECTION_PHRASES[h]}
    pieces, offset = [], 0
    for sentence, sep in _split(text):
        base = offset
        offset += len(sentence) + len(sep)
        found = []
        for order, (rule, pattern) in enumerate(compiled):
            found.extend((m.start(), m.end(), order, rule) for m in pattern.finditer(sentence))
        if not found:
            pieces.append((sentence, sep))
            continue
        lead = len(sentence) - len(sentence.lstrip())
        out, found_here = sentence, []
        for start, end, _, rule in sorted(_greedy(found), key=lambda m: -m[0]):
            repl = rule.template.format(**fill) if target is not None else rule.fallback
            if start == lead or sentence[start:start + 1].isupper():
                repl = capitalize_first(repl)
            out = out[:start] + repl + out[end:]
            found_here.append((rule.rule_id, (base + start, base + end)))
        applied.extend(sorted(found_here, key=lambda a: a[1]))
        pieces.append((out, sep))
    return _rebuild(text, pieces)


def rewrite_response(text: str, rules: RuleSet, scene: Optional[DetectionSet] = None,
                     near_area: float = NEAR_AREA_DEFAULT, query: Optional[str] = None) -> RewriteResult:
    """Apply every pass to ``text``.

    ``scene`` grounds vague phrases; ``query`` (the user's question) helps
    pick which detected object they were about.
    """
    if not text:
        return RewriteResult("")
    text = normalize_quotes(text)
    offensive = rules.pattern("offensive")
    hits = list(offensive.finditer(text)) if offensive is not None else []
    if hits:
        return RewriteResult(rules.refusal_message,
                             tuple((OFFENSIVE_RULE, (m.start(), m.end())) for m in hits), True)
    applied: list = []
    text = _visual_pass(text, rules, applied)
    text = _color_pass(text, rules, applied)
    text = _vague_pass(text, rules, scene, applied, near_area, query)
    if not text.strip():
        text = NOTHING_LEFT_MESSAGE
    return RewriteResult(text, tuple(applied), False)
