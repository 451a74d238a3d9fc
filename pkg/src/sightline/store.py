"""File-backed stores: voice profiles, the face gallery and host pins.

Each store is one JSON document with a ``kind`` and a schema ``version``::

    {"kind": "profiles", "version": 1, "n_coeffs": 13, "profiles": [...]}
    {"kind": "gallery", "version": 1, "entries": [...]}
    {"kind": "pins", "version": 1, "hosts": {"10.0.0.2": "<64 hex chars>"}}

Saves write a temporary file in the target directory and rename it over the
old one, so readers only ever see a complete document.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .core import SightlineError
from .perception import FaceGalleryEntry
from .voiceid import VoiceProfile

SCHEMA_VERSION = 1


class StoreError(SightlineError):
    pass


def _unique(ids, what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise StoreError(f"duplicate {what} {i!r}")
        seen.add(i)


@dataclass(frozen=True)
class ProfileStore:
    profiles: tuple = ()
    n_coeffs: int = 13
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        _unique((p.user_id for p in self.profiles), "user_id")
        for p in self.profiles:
            if len(p.vector) != self.n_coeffs:
                raise StoreError(f"profile {p.user_id!r} has {len(p.vector)} coefficients, "
                                 f"store expects {self.n_coeffs}")

    def get(self, user_id: str):
        for p in self.profiles:
            if p.user_id == user_id:
                return p
        return None

    def to_dict(self) -> dict:
        return {"kind": "profiles", "version": self.version, "n_coeffs": self.n_coeffs,
                "profiles": [p.to_dict() for p in self.profiles]}

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileStore":
        return cls(tuple(VoiceProfile.from_dict(p) for p in d["profiles"]),
                   int(d["n_coeffs"]), int(d["version"]))


@dataclass(frozen=True)
class GalleryStore:
    entries: tuple = ()
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        _unique((e.person_id for e in self.entries), "person_id")

    def as_mapping(self) -> dict:
        return {e.person_id: e for e in self.entries}

    def to_dict(self) -> dict:
        return {"kind": "gallery", "version": self.version,
                "entries": [{"person_id": e.person_id, "template": e.template,
                             "description": e.description} for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "GalleryStore":
        return cls(tuple(FaceGalleryEntry(str(e["person_id"]), str(e.get("template", "")),
                                          str(e["description"])) for e in d["entries"]),
                   int(d["version"]))


@dataclass(frozen=True)
class PinStore:
    """address -> 32-byte server fingerprint."""

    hosts: Mapping = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        hosts = dict(self.hosts)
        for addr, fp in hosts.items():
            if not isinstance(fp, bytes) or len(fp) != 32:
                raise StoreError(f"pin for {addr!r} must be 32 bytes")
        object.__setattr__(self, "hosts", hosts)

    def to_dict(self) -> dict:
        return {"kind": "pins", "version": self.version,
                "hosts": {a: fp.hex() for a, fp in sorted(self.hosts.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "PinStore":
        return cls({str(a): bytes.fromhex(fp) for a, fp in d["hosts"].items()}, int(d["version"]))


_KINDS = {"profiles": ProfileStore, "gallery": GalleryStore, "pins": PinStore}


def upsert_profile(store: ProfileStore, profile: VoiceProfile) -> ProfileStore:
    """Insert or replace by user_id; the vector length must match the store."""
    if len(profile.vector) != store.n_coeffs:
        raise StoreError(f"profile vector has {len(profile.vector)} coefficients, "
                         f"store expects {store.n_coeffs}")
    kept = [p for p in store.profiles if p.user_id != profile.user_id]
    if len(kept) == len(store.profiles):
        kept.append(profile)
    else:
        kept = [profile if p.user_id == profile.user_id else p for p in store.profiles]
    return ProfileStore(tuple(kept), store.n_coeffs, store.version)


def upsert_gallery(store: GalleryStore, entry: FaceGalleryEntry) -> GalleryStore:
    entries = [e for e in store.entries if e.person_id != entry.person_id]
    if len(entries) == len(store.entries):
        return GalleryStore(store.entries + (entry,), store.version)
    return GalleryStore(tuple(entry if e.person_id == entry.person_id else e for e in store.entries),
                        store.version)


def dumps(store) -> str:
    return json.dumps(store.to_dict(), indent=2, sort_keys=True) + "\n"


def save(store, path) -> None:
    path = Path(path)
    data = dumps(store)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def loads(text: str, expect: str = None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"cannot parse store: {exc}") from None
    if not isinstance(doc, dict):
        raise StoreError("store document must be an object")
    kind = doc.get("kind")
    if kind not in _KINDS:
        raise StoreError(f"unknown store kind {kind!r}")
    if expect is not None and kind != expect:
        raise StoreError(f"expected a {expect} store, found {kind}")
    if doc.get("version") != SCHEMA_VERSION:
        raise StoreError(f"unsupported store version {doc.get('version')!r} (want {SCHEMA_VERSION})")
    try:
        return _KINDS[kind].from_dict(doc)
    except StoreError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise StoreError(f"malformed {kind} store: {exc!r}") from None


def load(path, expect: str = None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc.strerror or exc}") from None
    return loads(text, expect)


def load_or_empty(path, kind: str, **defaults):
    """Load ``path`` if it exists, else an empty store of ``kind``."""
    if path is not None and Path(path).exists():
        return load(path, kind)
    return _KINDS[kind](**defaults)


def inspect(store) -> dict:
    """Short summary used by ``store inspect``."""
    if isinstance(store, ProfileStore):
        return {"kind": "profiles", "version": store.version, "n_coeffs": store.n_coeffs,
                "count": len(store.profiles), "ids": [p.user_id for p in store.profiles]}
    if isinstance(store, GalleryStore):
        return {"kind": "gallery", "version": store.version, "count": len(store.entries),
                "ids": [e.person_id for e in store.entries]}
    return {"kind": "pins", "version": store.version, "count": len(store.hosts),
            "ids": sorted(store.hosts)}
