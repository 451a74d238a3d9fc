"""Simulated stage latencies.

A model turns the text a stage works on into a duration in ms:

    {"model": "constant", "ms": 5620}
    {"model": "gaussian", "mean": 5620, "sd": 400, "seed": 7}
    {"model": "vocabulary", "base_ms": 3000, "k": 800, "noise_sd": 300, "seed": 7}

The vocabulary model grows with how uncommon the words are; a word's
rarity is -log10 of its frequency in the bundled word table, and words
missing from the table get the table's highest rarity.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional

import numpy as np

from ..core import SightlineError

_WORD = re.compile(r"[a-z]+")


class LatencySpecError(SightlineError):
    pass


class RarityTable:
    def __init__(self, freqs: Mapping):
        if not freqs:
            raise ValueError("rarity table is empty")
        self.rarity = {w: -math.log10(f) for w, f in freqs.items()}
        self.max_rarity = max(self.rarity.values())

    def word_rarity(self, word: str) -> float:
        return self.rarity.get(word.lower(), self.max_rarity)

    def text_rarity(self, text: str) -> float:
        """Mean rarity of the words in ``text``; 0 for text without words."""
        words = _WORD.findall(text.lower())
        if not words:
            return 0.0
        return sum(self.word_rarity(w) for w in words) / len(words)

    def __contains__(self, word):
        return word in self.rarity

    def words(self) -> list:
        return list(self.rarity)


def parse_rarity_table(text: str) -> RarityTable:
    freqs = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            word, freq = line.split("\t")
            value = float(freq)
        except ValueError:
            raise LatencySpecError(f"word table line {n}: expected 'word<TAB>frequency'") from None
        if not 0 < value <= 1:
            raise LatencySpecError(f"word table line {n}: frequency {value} outside (0, 1]")
        freqs[word] = value
    return RarityTable(freqs)


@lru_cache(maxsize=1)
def default_rarity_table() -> RarityTable:
    text = resources.files("sightline").joinpath("data/word_frequency.tsv").read_text(encoding="utf-8")
    return parse_rarity_table(text)


class LatencyModel:
    def sample(self, text: str = "") -> int:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class Constant(LatencyModel):
    ms: int

    def __post_init__(self):
        if self.ms < 0:
            raise LatencySpecError("constant latency must be >= 0")

    def sample(self, text: str = "") -> int:
        return int(self.ms)

    def to_dict(self) -> dict:
        return {"model": "constant", "ms": self.ms}


@dataclass
class Gaussian(LatencyModel):
    """Normal draws from a private seeded generator, clipped at zero."""

    mean: float
    sd: float
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.mean < 0 or self.sd < 0:
            raise LatencySpecError("gaussian mean and sd must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    def sample(self, text: str = "") -> int:
        return max(0, int(round(self._rng.normal(self.mean, self.sd))))

    def to_dict(self) -> dict:
        return {"model": "gaussian", "mean": self.mean, "sd": self.sd, "seed": self.seed}


@dataclass
class VocabularyLinked(LatencyModel):
    """base_ms + k * mean word rarity, plus optional seeded noise."""

    base_ms: float
    k: float
    rarity_table: Optional[RarityTable] = None
    noise_sd: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.base_ms < 0 or self.k < 0 or self.noise_sd < 0:
            raise LatencySpecError("vocabulary model parameters must be >= 0")
        if self.rarity_table is None:
            self.rarity_table = default_rarity_table()
        self._rng = np.random.default_rng(self.seed)

    def sample(self, text: str = "") -> int:
        value = self.base_ms + self.k * self.rarity_table.text_rarity(text)
        if self.noise_sd:
            value += self._rng.normal(0.0, self.noise_sd)
        return max(0, int(round(value)))

    def to_dict(self) -> dict:
        return {"model": "vocabulary", "base_ms": self.base_ms, "k": self.k,
                "noise_sd": self.noise_sd, "seed": self.seed}


def _num(spec: dict, key: str, default=None):
    if key not in spec:
        if default is None:
            raise LatencySpecError(f"latency model {spec.get('model')!r} needs {key!r}")
        return default
    value = spec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise LatencySpecError(f"latency field {key!r} must be a number")
    return value


def latency_from_spec(spec) -> LatencyModel:
    """Build a model from its dict form; a bare number means constant."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(int(spec))
    if not isinstance(spec, dict):
        raise LatencySpecError(f"latency spec must be a number or an object, got {spec!r}")
    kind = spec.get("model")
    known = {"constant": {"model", "ms"},
             "gaussian": {"model", "mean", "sd", "seed"},
             "vocabulary": {"model", "base_ms", "k", "noise_sd", "seed"}}
    if kind not in known:
        raise LatencySpecError(f"unknown latency model {kind!r}")
    extra = set(spec) - known[kind]
    if extra:
        raise LatencySpecError(f"unknown field(s) for {kind} latency: {sorted(extra)}")
    if kind == "constant":
        return Constant(int(_num(spec, "ms")))
    if kind == "gaussian":
        return Gaussian(_num(spec, "mean"), _num(spec, "sd"), int(_num(spec, "seed", 0)))
    return VocabularyLinked(_num(spec, "base_ms"), _num(spec, "k"), None,
                            _num(spec, "noise_sd", 0.0), int(_num(spec, "seed", 0)))
