"""Reasoning, transcription and speech-output backends.

Every model sits behind a small interface with a deterministic mock and,
for reasoning, an HTTP client for an external model service.

The HTTP wire format is one JSON request/response pair::

    POST <url>
    {"prompt": "...", "image": <base64 or null>, "width": W, "height": H,
     "encoding": "GRAY8" | "RGB8" | null}

    200 OK
    {"text": "...", "latency_ms": 5620}
"""
from __future__ import annotations

import base64
import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from http.server import BaseHTTPRequestHandler
from typing import Callable, Optional, Protocol

import numpy as np

from ..core import Frame, SightlineError
from .prompt import Prompt


class Capability(str, Enum):
    TEXT_ONLY = "text"
    MULTIMODAL = "multimodal"


class BackendError(SightlineError):
    pass


@dataclass(frozen=True)
class BackendReply:
    text: str
    latency_ms: int


class ReasoningBackend(Protocol):
    name: str
    capability: Capability

    def invoke(self, prompt: Prompt, frame: Optional[Frame] = None) -> BackendReply:
        ...


# (user_query, reply_text) -> milliseconds
LatencyFn = Callable[[str, str], int]


def _zero_latency(query_text: str, reply_text: str) -> int:
    return 0


class MockBackend:
    """Canned replies chosen by keyword, with a pluggable latency model.

    ``responses`` maps a lower-case keyword to a reply; the first keyword
    found in the user query wins, in insertion order. The key ``"default"``
    is used when nothing matches. Setting ``scripted`` overrides the reply
    until it is cleared, which lets a simulator dictate each answer.
    """

    def __init__(self, name: str, capability: Capability, responses: Optional[dict] = None,
                 latency: LatencyFn = _zero_latency, fail: bool = False):
        self.name = name
        self.capability = Capability(capability)
        self.responses = dict(responses or {})
        self.latency = latency
        self.fail = fail
        self.calls: list = []
        self.scripted: Optional[str] = None

    def reply_for(self, query: str) -> str:
        q = query.lower()
        for key, text in self.responses.items():
            if key != "default" and key.lower() in q:
                return text
        return self.responses.get("default", f"I heard: {query}")

    def invoke(self, prompt: Prompt, frame: Optional[Frame] = None) -> BackendReply:
        if frame is not None and self.capability is Capability.TEXT_ONLY:
            raise BackendError(f"text-only backend {self.name!r} cannot take a frame")
        self.calls.append((prompt, frame))
        if self.fail:
            raise BackendError(f"backend {self.name!r} failed")
        text = self.scripted if self.scripted is not None else self.reply_for(prompt.user_query)
        return BackendReply(text, int(self.latency(prompt.user_query, text)))


def _encode_frame(frame: Optional[Frame]) -> dict:
    if frame is None or frame.pixels is None:
        return {"image": None, "width": None, "height": None, "encoding": None}
    px = np.ascontiguousarray(frame.pixels, dtype=np.uint8)
    return {
        "image": base64.b64encode(px.tobytes()).decode("ascii"),
        "width": frame.width,
        "height": frame.height,
        "encoding": "RGB8" if px.ndim == 3 else "GRAY8",
    }


class HttpReasoningBackend:
    """Client for an external model service speaking the JSON format above."""

    def __init__(self, name: str, capability: Capability, url: str, timeout_s: float = 30.0):
        self.name = name
        self.capability = Capability(capability)
        self.url = url
        self.timeout_s = timeout_s

    def invoke(self, prompt: Prompt, frame: Optional[Frame] = None) -> BackendReply:
        if frame is not None and self.capability is Capability.TEXT_ONLY:
            raise BackendError(f"text-only backend {self.name!r} cannot take a frame")
        body = {"prompt": prompt.render(), **_encode_frame(frame)}
        req = urllib.request.Request(self.url, data=json.dumps(body).encode("utf-8"),
                                     headers={"Content-Type": "application/json"}, method="POST")
        t0 = time.monotonic()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise BackendError(f"{self.name}: request to {self.url} failed: {exc}") from exc
        elapsed = int((time.monotonic() - t0) * 1000)
        try:
            text = str(payload["text"])
        except (KeyError, TypeError):
            raise BackendError(f"{self.name}: malformed reply {payload!r}") from None
        # prefer our own round-trip time; the server figure excludes transport
        return BackendReply(text, max(elapsed, int(payload.get("latency_ms", 0) or 0)))


def backend_http_handler(backend: ReasoningBackend):
    """An ``http.server`` handler class serving ``backend`` in the JSON format."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                req = json.loads(self.rfile.read(length).decode("utf-8"))
                query = req["prompt"].rsplit("Question: ", 1)[-1]
                frame = None
                if req.get("image"):
                    raw = np.frombuffer(base64.b64decode(req["image"]), dtype=np.uint8)
                    shape = (req["height"], req["width"], 3) if req["encoding"] == "RGB8" \
                        else (req["height"], req["width"])
                    frame = Frame(0, 0, req["width"], req["height"], raw.reshape(shape))
                reply = backend.invoke(Prompt("", query), frame)
                body, status = {"text": reply.text, "latency_ms": reply.latency_ms}, 200
            except BackendError as exc:
                body, status = {"error": str(exc)}, 502
            except (KeyError, ValueError, TypeError) as exc:
                body, status = {"error": f"bad request: {exc}"}, 400
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    return Handler


class BackendRegistry:
    """In-process backends, looked up by name or by capability (registration order)."""

    def __init__(self, backends=()):
        self._by_name: dict = {}
        for b in backends:
            self.register(b)

    def register(self, backend) -> None:
        if backend.name in self._by_name:
            raise BackendError(f"backend {backend.name!r} already registered")
        self._by_name[backend.name] = backend

    def get(self, name: str):
        try:
            return self._by_name[name]
        except KeyError:
            raise BackendError(f"no backend named {name!r}") from None

    def first(self, capability: Capability):
        for b in self._by_name.values():
            if b.capability is Capability(capability):
                return b
        raise BackendError(f"no {Capability(capability).value} backend registered")

    def __iter__(self):
        return iter(self._by_name.values())


# ---------------------------------------------------------------------------
# speech in / speech out


class Transcriber(Protocol):
    def transcribe(self, audio_ref: Optional[str], text_hint: Optional[str]) -> tuple:
        """Return ``(text, latency_ms)``."""


class PassThroughTranscriber:
    """Returns the utterance text it is handed; audio refs resolve through a table."""

    def __init__(self, transcripts: Optional[dict] = None, latency: Callable[[str], int] = lambda t: 0):
        self.transcripts = dict(transcripts or {})
        self.latency = latency

    def transcribe(self, audio_ref: Optional[str], text_hint: Optional[str]) -> tuple:
        if text_hint is not None:
            text = text_hint
        elif audio_ref is not None and audio_ref in self.transcripts:
            text = self.transcripts[audio_ref]
        else:
            raise BackendError(f"cannot transcribe {audio_ref!r}: no transcript available")
        return text, int(self.latency(text))


class SpeechSink(Protocol):
    def speak(self, t_ms: int, kind: str, text: str) -> None:
        ...


class ListSink:
    """Collects spoken lines in order; the simulator transcript uses one."""

    def __init__(self):
        self.lines: list = []

    def speak(self, t_ms: int, kind: str, text: str) -> None:
        self.lines.append((t_ms, kind, text))
