"""Query-safety classification and the under-18 gate."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import yaml

from ..core import SAFE, AgeRange, SafetyVerdict, SightlineError
from .rules import normalize_quotes, phrase_regex

N_CATEGORIES = 13

# text -> SafetyVerdict; stands in for an external safety model
SafetyBackend = Callable[[str], SafetyVerdict]


class TaxonomyError(SightlineError):
    pass


class AgeUnresolvedError(SightlineError):
    """The gate needs a resolved age; run the age confirmation prompt first."""


@dataclass(frozen=True)
class Category:
    name: str
    keywords: tuple


class SafetyTaxonomy:
    def __init__(self, categories):
        cats = tuple(Category(c.name, tuple(k.lower() for k in c.keywords)) for c in categories)
        names = [c.name for c in cats]
        if len(cats) != N_CATEGORIES:
            raise TaxonomyError(f"taxonomy needs exactly {N_CATEGORIES} categories, got {len(cats)}")
        if len(set(names)) != len(names):
            raise TaxonomyError("category names must be unique")
        self.categories = cats
        self._patterns = [(c.name, phrase_regex(c.keywords)) for c in cats]

    @property
    def names(self) -> list:
        return [c.name for c in self.categories]

    def match(self, text: str) -> SafetyVerdict:
        norm = normalize_quotes(text)
        for name, pattern in self._patterns:
            if pattern is None:
                continue
            hits = [m for m in pattern.finditer(norm)]
            if hits:
                # earliest, then longest; independent of keyword order
                first = min(hits, key=lambda m: (m.start(), -(m.end() - m.start())))
                return SafetyVerdict(name, norm[first.start():first.end()].lower())
        return SAFE


def load_taxonomy(path=None) -> SafetyTaxonomy:
    try:
        if path is None:
            text = resources.files("sightline").joinpath("data/safety_taxonomy.yaml").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        data = yaml.safe_load(text)
    except (OSError, yaml.YAMLError) as exc:
        raise TaxonomyError(f"cannot load taxonomy {path}: {exc}") from exc
    try:
        cats = [Category(str(c["name"]), tuple(str(k) for k in c["keywords"]))
                for c in data["categories"]]
    except (KeyError, TypeError) as exc:
        raise TaxonomyError(f"malformed taxonomy: {exc}") from exc
    return SafetyTaxonomy(cats)


def classify_query(text: str, taxonomy: SafetyTaxonomy,
                   backend: Optional[SafetyBackend] = None) -> SafetyVerdict:
    if not text or not text.strip():
        raise ValueError("cannot classify empty text")
    if backend is not None:
        verdict = backend(text)
        if not verdict.safe and verdict.category not in taxonomy.names:
            raise TaxonomyError(f"backend returned unknown category {verdict.category!r}")
        return verdict
    return taxonomy.match(text)


@dataclass(frozen=True)
class GateDecision:
    forward: bool
    query_text: str
    verdict: Optional[SafetyVerdict] = None  # None when the filter was bypassed

    @property
    def filtered(self) -> bool:
        return self.verdict is not None


def gate_query(query_text: str, age, taxonomy: SafetyTaxonomy,
               backend: Optional[SafetyBackend] = None) -> GateDecision:
    """Adults bypass the filter; minors are forwarded only when the query is safe."""
    rng = getattr(age, "range", age)
    rng = AgeRange(rng)
    if rng is AgeRange.UNKNOWN:
        raise AgeUnresolvedError("age range is unknown; confirm the user's age before gating")
    if rng is AgeRange.OVER_18:
        return GateDecision(True, query_text)
    verdict = classify_query(query_text, taxonomy, backend)
    return GateDecision(verdict.safe, query_text, verdict)
