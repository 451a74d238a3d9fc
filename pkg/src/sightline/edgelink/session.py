"""Handshake with fingerprint pinning, image preprocessing and frame transfer.

The edge side opens with an OFFER (its address, fingerprint, image
directory and user name). The peripheral checks the fingerprint against its
pins: unknown addresses are trusted on first use, known ones must match or
the connection is refused and closed. Afterwards the peripheral streams
FRAME messages and the edge answers each with ACK or NAK.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..core import SightlineError
from ..kernels import luma_rotate_cw
from .wire import (
    Channel,
    ChecksumError,
    Encoding,
    HandshakeOffer,
    ImageEnvelope,
    MsgType,
    ProtocolError,
    decode_envelope,
    decode_offer,
    decode_seq,
    encode_envelope,
    encode_offer,
    encode_seq,
    frame_message,
)


class HandshakeRejected(SightlineError):
    pass


class FingerprintMismatchError(HandshakeRejected):
    pass


class CorruptFrameError(ProtocolError):
    """A frame failed its CRC; a NAK has already been sent."""

    def __init__(self, sequence: int):
        super().__init__(f"frame {sequence} failed its checksum; NAK sent")
        self.sequence = sequence


class PinCheck(str, Enum):
    NEW = "new"
    MATCH = "match"
    MISMATCH = "mismatch"


class PinnedHost:
    """address -> fingerprint pins, optionally persisted to a pin store file.

    Pins only change through ``trust``; updates are serialized.
    """

    def __init__(self, pins: Optional[dict] = None, path=None):
        self._pins = dict(pins or {})
        self.path = path
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path) -> "PinnedHost":
        from ..store import load_or_empty
        return cls(load_or_empty(path, "pins").hosts, path)

    def get(self, address: str) -> Optional[bytes]:
        with self._lock:
            return self._pins.get(address)

    def check(self, address: str, fingerprint: bytes) -> PinCheck:
        pinned = self.get(address)
        if pinned is None:
            return PinCheck.NEW
        return PinCheck.MATCH if pinned == fingerprint else PinCheck.MISMATCH

    def trust(self, address: str, fingerprint: bytes) -> None:
        if len(fingerprint) != 32:
            raise ValueError("fingerprint must be 32 bytes")
        with self._lock:
            self._pins[address] = bytes(fingerprint)
            if self.path is not None:
                from ..store import PinStore, save
                save(PinStore(self._pins), self.path)

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._pins)

    def __len__(self):
        return len(self._pins)


@dataclass
class Session:
    channel: Channel
    offer: HandshakeOffer
    last_seq: int = -1  # receiver side: highest sequence accepted

    def close(self) -> None:
        try:
            self.channel.send(MsgType.BYE)
        except (OSError, ProtocolError):
            pass
        self.channel.close()


def handshake(channel: Channel, pins: PinnedHost) -> Session:
    """Peripheral side: read the edge's OFFER and accept or refuse it."""
    mtype, body = channel.recv()
    if mtype is not MsgType.OFFER:
        channel.close()
        raise ProtocolError(f"expected OFFER, got {mtype.name}")
    try:
        offer = decode_offer(body)
    except ProtocolError as exc:
        channel.send(MsgType.REJECT, _reason(f"malformed offer: {exc}"))
        channel.close()
        raise
    verdict = pins.check(offer.edge_address, offer.server_fingerprint)
    if verdict is PinCheck.MISMATCH:
        channel.send(MsgType.REJECT, _reason("fingerprint does not match pinned host"))
        channel.close()
        raise FingerprintMismatchError(f"fingerprint for {offer.edge_address} does not match its pin")
    if verdict is PinCheck.NEW:
        pins.trust(offer.edge_address, offer.server_fingerprint)
    channel.send(MsgType.ACCEPT)
    return Session(channel, offer)


def offer_session(channel: Channel, offer: HandshakeOffer) -> Session:
    """Edge side: send the OFFER and wait for the peripheral's answer."""
    channel.send(MsgType.OFFER, encode_offer(offer))
    mtype, body = channel.recv()
    if mtype is MsgType.ACCEPT:
        return Session(channel, offer)
    channel.close()
    if mtype is MsgType.REJECT:
        raise HandshakeRejected(body[2:].decode("utf-8", "replace"))
    raise ProtocolError(f"expected ACCEPT or REJECT, got {mtype.name}")


def _reason(text: str) -> bytes:
    raw = text.encode("utf-8")[:0xFFFF]
    return len(raw).to_bytes(2, "big") + raw


def preprocess(image) -> np.ndarray:
    """Luma conversion then a 90 degree clockwise turn; HxW(x3) in, WxH out."""
    a = np.asarray(image)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"expected GRAY8 (HxW) or RGB8 (HxWx3), got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    return luma_rotate_cw(np.ascontiguousarray(a, dtype=np.uint8))


def envelope_from_image(sequence: int, capture_ms: int, image) -> ImageEnvelope:
    a = np.ascontiguousarray(image, dtype=np.uint8)
    enc = Encoding.RGB8 if a.ndim == 3 else Encoding.GRAY8
    return ImageEnvelope(sequence, capture_ms, a.shape[1], a.shape[0], enc, a.tobytes())


def image_from_envelope(env: ImageEnvelope) -> np.ndarray:
    shape = (env.height, env.width) if env.encoding is Encoding.GRAY8 else (env.height, env.width, 3)
    return np.frombuffer(env.payload, dtype=np.uint8).reshape(shape)


def send_frame(session: Session, envelope: ImageEnvelope) -> None:
    session.channel.send(MsgType.FRAME, encode_envelope(envelope))


def await_reply(session: Session) -> tuple:
    """Sender side: ``(acked, sequence)`` from the next ACK or NAK."""
    mtype, body = session.channel.recv()
    if mtype not in (MsgType.ACK, MsgType.NAK):
        raise ProtocolError(f"expected ACK or NAK, got {mtype.name}")
    return mtype is MsgType.ACK, decode_seq(body)


def transfer(session: Session, envelope: ImageEnvelope) -> bool:
    """Send one frame and wait for its answer; True when acknowledged."""
    send_frame(session, envelope)
    acked, seq = await_reply(session)
    if seq != envelope.sequence:
        raise ProtocolError(f"reply for sequence {seq}, sent {envelope.sequence}")
    return acked


def receive_frame(session: Session) -> Optional[ImageEnvelope]:
    """Receiver side: next verified frame, or None when the peer said BYE.

    A bad checksum sends NAK(sequence) and raises CorruptFrameError; the
    sequence is not consumed, so the sender may retransmit it. A sequence
    at or below the last accepted one is a protocol error.
    """
    mtype, body = session.channel.recv()
    if mtype is MsgType.BYE:
        session.channel.close()
        return None
    if mtype is not MsgType.FRAME:
        raise ProtocolError(f"expected FRAME, got {mtype.name}")
    try:
        env = decode_envelope(body)
    except ChecksumError as exc:
        session.channel.send(MsgType.NAK, encode_seq(exc.sequence))
        raise CorruptFrameError(exc.sequence) from None
    if env.sequence <= session.last_seq:
        raise ProtocolError(f"sequence {env.sequence} after {session.last_seq}")
    session.last_seq = env.sequence
    session.channel.send(MsgType.ACK, encode_seq(env.sequence))
    return env


def flip_payload_bit(message: bytes, bit: int) -> bytes:
    """Test helper: flip one payload bit inside an encoded FRAME message."""
    payload_start = 5 + 29
    buf = bytearray(message)
    buf[payload_start + bit // 8] ^= 1 << (bit % 8)
    return bytes(buf)


def encoded_frame(envelope: ImageEnvelope) -> bytes:
    return frame_message(MsgType.FRAME, encode_envelope(envelope))
