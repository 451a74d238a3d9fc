"""Bit-exact message codec for the peripheral/edge link.

Every message is ``[u32 BE length][u8 type][body]`` where ``length`` counts
the type byte plus the body. Strings are UTF-8 with a u16 BE byte-count
prefix. Bodies:

    OFFER   u16 version, str address, str directory, str username, 32-byte fingerprint
    ACCEPT  empty
    REJECT  str reason
    FRAME   u64 sequence, u64 capture_ms, u32 width, u32 height, u8 encoding,
            u32 payload length, payload, u32 CRC-32 of payload
    ACK     u64 sequence
    NAK     u64 sequence
    BYE     empty

CRC-32 is the reflected 0x04C11DB7 polynomial (the zlib/Ethernet one).
"""
from __future__ import annotations

import struct
import threading
import zlib
from dataclasses import dataclass, field
from enum import IntEnum

from ..core import SightlineError

FINGERPRINT_LEN = 32
MAX_MESSAGE = 64 * 1024 * 1024

_HEADER = struct.Struct(">IB")
_FRAME_HEAD = struct.Struct(">QQIIBI")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class ProtocolError(SightlineError):
    pass


class ChecksumError(ProtocolError):
    def __init__(self, sequence: int, expected: int, actual: int):
        super().__init__(f"frame {sequence}: CRC {actual:08x} != {expected:08x}")
        self.sequence = sequence


class ChannelClosed(ProtocolError):
    pass


class MsgType(IntEnum):
    OFFER = 1
    ACCEPT = 2
    REJECT = 3
    FRAME = 4
    ACK = 5
    NAK = 6
    BYE = 7


class Encoding(IntEnum):
    GRAY8 = 1
    RGB8 = 2

    @property
    def channels(self) -> int:
        return 1 if self is Encoding.GRAY8 else 3


@dataclass(frozen=True)
class HandshakeOffer:
    edge_address: str
    server_fingerprint: bytes
    image_directory: str
    username: str
    protocol_version: int = 1

    def __post_init__(self):
        if not isinstance(self.server_fingerprint, bytes) or len(self.server_fingerprint) != FINGERPRINT_LEN:
            raise ProtocolError(f"fingerprint must be exactly {FINGERPRINT_LEN} bytes")
        if not 1 <= self.protocol_version <= 0xFFFF:
            raise ProtocolError(f"bad protocol version {self.protocol_version}")


@dataclass(frozen=True)
class ImageEnvelope:
    sequence: int
    capture_timestamp_ms: int
    width: int
    height: int
    encoding: Encoding
    payload: bytes = field(repr=False)
    checksum: int = None

    def __post_init__(self):
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        object.__setattr__(self, "payload", bytes(self.payload))
        if not 0 <= self.sequence < 2 ** 64 or not 0 <= self.capture_timestamp_ms < 2 ** 64:
            raise ProtocolError("sequence and timestamp must fit in u64")
        if not (0 < self.width < 2 ** 32 and 0 < self.height < 2 ** 32):
            raise ProtocolError(f"bad image size {self.width}x{self.height}")
        want = self.width * self.height * self.encoding.channels
        if len(self.payload) != want:
            raise ProtocolError(f"payload is {len(self.payload)} bytes, expected {want}")
        actual = zlib.crc32(self.payload)
        if self.checksum is None:
            object.__setattr__(self, "checksum", actual)
        elif self.checksum != actual:
            raise ChecksumError(self.sequence, self.checksum, actual)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string too long for the wire")
    return _U16.pack(len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("message body truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def string(self) -> str:
        (n,) = self.unpack(_U16)
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("string is not valid UTF-8") from None

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} trailing bytes in message body")


def frame_message(mtype: MsgType, body: bytes = b"") -> bytes:
    return _HEADER.pack(len(body) + 1, int(mtype)) + body


def encode_offer(offer: HandshakeOffer) -> bytes:
    return (_U16.pack(offer.protocol_version) + _pack_str(offer.edge_address)
            + _pack_str(offer.image_directory) + _pack_str(offer.username) + offer.server_fingerprint)


def decode_offer(body: bytes) -> HandshakeOffer:
    r = _Reader(body)
    (version,) = r.unpack(_U16)
    address, directory, username = r.string(), r.string(), r.string()
    fingerprint = r.take(FINGERPRINT_LEN)
    r.done()
    return HandshakeOffer(address, fingerprint, directory, username, version)


def encode_envelope(env: ImageEnvelope) -> bytes:
    return (_FRAME_HEAD.pack(env.sequence, env.capture_timestamp_ms, env.width, env.height,
                             int(env.encoding), len(env.payload))
            + env.payload + _U32.pack(env.checksum))


def decode_envelope(body: bytes) -> ImageEnvelope:
    """Raises ChecksumError (carrying the sequence) when the payload CRC is wrong."""
    r = _Reader(body)
    seq, ts, w, h, enc, n = r.unpack(_FRAME_HEAD)
    payload = r.take(n)
    (checksum,) = r.unpack(_U32)
    r.done()
    try:
        enc = Encoding(enc)
    except ValueError:
        raise ProtocolError(f"unknown encoding {enc}") from None
    return ImageEnvelope(seq, ts, w, h, enc, payload, checksum)


def encode_seq(seq: int) -> bytes:
    return _U64.pack(seq)


def decode_seq(body: bytes) -> int:
    r = _Reader(body)
    (seq,) = r.unpack(_U64)
    r.done()
    return seq


class Channel:
    """Message framing over a stream socket (or anything with sendall/recv).

    Sends are serialized by a lock so a sender and a receiver thread can
    share one channel.
    """

    def __init__(self, sock):
        self.sock = sock
        self._send_lock = threading.Lock()
        self.closed = False

    def send(self, mtype: MsgType, body: bytes = b"") -> None:
        self.send_raw(frame_message(mtype, body))

    def send_raw(self, data: bytes) -> None:
        if self.closed:
            raise ChannelClosed("channel is closed")
        with self._send_lock:
            self.sock.sendall(data)

    def _recv_exact(self, n: int) -> bytes:
        chunks, got = [], 0
        while got < n:
            chunk = self.sock.recv(min(n - got, 1 << 20))
            if not chunk:
                raise ChannelClosed("peer closed the connection")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def recv(self) -> tuple:
        """Next ``(MsgType, body)``."""
        length, raw_type = _HEADER.unpack(self._recv_exact(_HEADER.size))
        if length < 1 or length > MAX_MESSAGE:
            raise ProtocolError(f"bad message length {length}")
        body = self._recv_exact(length - 1)
        try:
            return MsgType(raw_type), body
        except ValueError:
            raise ProtocolError(f"unknown message type {raw_type}") from None

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            try:
                self.sock.close()
            except OSError:
                pass
