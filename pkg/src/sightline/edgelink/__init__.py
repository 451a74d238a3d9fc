"""Peripheral to edge link: discovery, pinned handshake, preprocessing, framed transfer."""
from .discovery import (
    DiscoveryConflict,
    DiscoveryError,
    DiscoveryTimeout,
    SimulatedMulticast,
    UdpMulticast,
    UdpResponder,
    discover,
)
from .session import (
    CorruptFrameError,
    FingerprintMismatchError,
    HandshakeRejected,
    PinCheck,
    PinnedHost,
    Session,
    await_reply,
    encoded_frame,
    envelope_from_image,
    flip_payload_bit,
    handshake,
    image_from_envelope,
    offer_session,
    preprocess,
    receive_frame,
    send_frame,
    transfer,
)
from .wire import (
    FINGERPRINT_LEN,
    Channel,
    ChannelClosed,
    ChecksumError,
    Encoding,
    HandshakeOffer,
    ImageEnvelope,
    MsgType,
    ProtocolError,
    decode_envelope,
    decode_offer,
    encode_envelope,
    encode_offer,
    frame_message,
)
