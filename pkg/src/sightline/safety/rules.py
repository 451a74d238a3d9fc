"""Rules file loading and word-boundary phrase matching."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from ..core import SightlineError

RULES_VERSION = 1

OFFENSIVE_RULE = "offensive.block"
VISUAL_RULE = "visual.remove"
COLOR_RULE = "color.remove"
COLOR_SENTENCE_RULE = "color.drop-sentence"
FIXED_RULE_IDS = frozenset({OFFENSIVE_RULE, VISUAL_RULE, COLOR_RULE, COLOR_SENTENCE_RULE})

_QUOTES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


class RulesError(SightlineError):
    pass


def normalize_quotes(text: str) -> str:
    """Fold typographic apostrophes to ASCII; keeps string length."""
    return text.translate(_QUOTES)


def phrase_regex(phrases) -> Optional[re.Pattern]:
    """One case-insensitive pattern matching any phrase on word boundaries.

    Longer phrases come first so the alternation prefers them at a given
    position.
    """
    norm = sorted({normalize_quotes(p).lower() for p in phrases if p.strip()},
                  key=lambda p: (-len(p), p))
    if not norm:
        return None
    parts = [r"\s+".join(re.escape(w) for w in p.split()) for p in norm]
    return re.compile(r"(?<!\w)(?:" + "|".join(parts) + r")(?!\w)", re.IGNORECASE)


@dataclass(frozen=True)
class VagueRule:
    rule_id: str
    phrase: str
    template: str
    fallback: str


@dataclass(frozen=True)
class RuleSet:
    offensive_terms: tuple
    visual_assumption_phrases: tuple = ()
    color_terms: tuple = ()
    color_modifiers: tuple = ()
    background_markers: tuple = ()
    vague_phrases: tuple = ()  # of VagueRule, in pass order
    refusal_message: str = "I'm sorry, I can't give that answer."
    _compiled: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in ("offensive_terms", "visual_assumption_phrases", "color_terms",
                     "color_modifiers", "background_markers"):
            object.__setattr__(self, name, tuple(normalize_quotes(p).strip().lower()
                                                 for p in getattr(self, name)))
        object.__setattr__(self, "vague_phrases", tuple(self.vague_phrases))
        c = self._compiled
        c["offensive"] = phrase_regex(self.offensive_terms)
        c["visual"] = phrase_regex(self.visual_assumption_phrases)
        c["background"] = phrase_regex(self.background_markers)
        c["color_word"] = phrase_regex(self.color_terms)
        c["color_run"] = _color_run_regex(self.color_terms, self.color_modifiers)
        c["vague"] = [(r, phrase_regex([r.phrase])) for r in self.vague_phrases]

    def pattern(self, name):
        return self._compiled[name]

    def rule_ids(self) -> list:
        return sorted(FIXED_RULE_IDS) + [r.rule_id for r in self.vague_phrases]


def _color_run_regex(terms, modifiers) -> Optional[re.Pattern]:
    if not terms:
        return None
    color = "|".join(re.escape(t) for t in sorted(set(terms), key=lambda t: (-len(t), t)))
    unit = r"(?:(?:%s)[\s-]+)?(?:%s)(?:-?ish|-colou?red|-toned)?" % (
        "|".join(re.escape(m) for m in modifiers) or "(?!x)x", color)
    sep = r"(?:\s*,\s*(?:and\s+|or\s+)?|\s+(?:and|or)\s+|\s*[-/]\s*|\s+)"
    return re.compile(r"(?<!\w)%s(?:%s%s)*(?!\w)" % (unit, sep, unit), re.IGNORECASE)


_TOP_KEYS = {"version", "refusal_message", "offensive_terms", "visual_assumptions",
             "color_terms", "vague_phrases"}
_SECTION_KEYS = {
    "offensive_terms": {"terms"},
    "visual_assumptions": {"phrases"},
    "color_terms": {"terms", "modifiers", "background_markers"},
}
_VAGUE_KEYS = {"id", "phrase", "template", "fallback"}


def _string_list(value, where):
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RulesError(f"{where} must be a list of strings")
    return value


def parse_rules(data) -> RuleSet:
    if not isinstance(data, dict):
        raise RulesError("rules file must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise RulesError(f"unknown rules sections: {sorted(unknown)}")
    if data.get("version", RULES_VERSION) != RULES_VERSION:
        raise RulesError(f"unsupported rules version {data.get('version')!r}")
    if "offensive_terms" not in data:
        raise RulesError("missing mandatory section [offensive_terms]")

    sections = {}
    for name, keys in _SECTION_KEYS.items():
        sec = data.get(name) or {}
        if not isinstance(sec, dict):
            raise RulesError(f"[{name}] must be a mapping")
        extra = set(sec) - keys
        if extra:
            raise RulesError(f"unknown fields in [{name}]: {sorted(extra)}")
        sections[name] = sec
    offensive = _string_list(sections["offensive_terms"].get("terms"), "offensive_terms.terms")
    if not offensive:
        raise RulesError("[offensive_terms] must list at least one term")

    vague = []
    seen = set(FIXED_RULE_IDS)
    for i, entry in enumerate(data.get("vague_phrases") or []):
        if not isinstance(entry, dict):
            raise RulesError(f"vague_phrases[{i}] must be a mapping")
        extra = set(entry) - _VAGUE_KEYS
        missing = _VAGUE_KEYS - set(entry)
        if extra or missing:
            raise RulesError(f"vague_phrases[{i}]: unknown {sorted(extra)} / missing {sorted(missing)}")
        if entry["id"] in seen:
            raise RulesError(f"duplicate rule id {entry['id']!r}")
        seen.add(entry["id"])
        try:
            entry["template"].format(label="x", position="y", direction="z")
        except (KeyError, IndexError) as exc:
            raise RulesError(f"vague_phrases[{i}]: bad template placeholder {exc}") from None
        vague.append(VagueRule(entry["id"], entry["phrase"], entry["template"], entry["fallback"]))

    kwargs = {}
    if "refusal_message" in data:
        kwargs["refusal_message"] = str(data["refusal_message"])
    return RuleSet(
        offensive_terms=tuple(offensive),
        visual_assumption_phrases=tuple(_string_list(sections["visual_assumptions"].get("phrases"),
                                                     "visual_assumptions.phrases")),
        color_terms=tuple(_string_list(sections["color_terms"].get("terms"), "color_terms.terms")),
        color_modifiers=tuple(_string_list(sections["color_terms"].get("modifiers"),
                                           "color_terms.modifiers")),
        background_markers=tuple(_string_list(sections["color_terms"].get("background_markers"),
                                              "color_terms.background_markers")),
        vague_phrases=tuple(vague),
        **kwargs,
    )


def load_rules(path=None) -> RuleSet:
    """Load a rules file; ``None`` loads the rules shipped with the package."""
    try:
        if path is None:
            text = resources.files("sightline").joinpath("data/default_rules.yaml").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise RulesError(f"cannot read rules file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RulesError(f"cannot parse rules file {path}: {exc}") from exc
    return parse_rules(data)
