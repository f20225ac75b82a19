"""Secure frame codec and per-hop stop-and-wait ARQ.

Wire layout (little-endian)::

    header (26 B) | u32 len | ciphertext | u64 tag | u32 crc

The header is ``origin, dest, hop_src, hop_dst`` (u16 each), ``app_seq,
hop_seq`` (u32), ``priority, ttl`` (u8), ``nonce`` (u64). The CRC covers
everything before it and is recomputed on every hop. The tag is keyed with
the origin's key and covers only the end-to-end fields (origin, dest,
app_seq, priority, nonce) plus the ciphertext, so forwarders can rewrite hop
fields without re-tagging and retransmissions reuse nonce and tag.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace

from .kernels import crc32, fnv1a64, keystream_xor, prf64 as _prf64

PAYLOAD_MAX = 64

_HDR = struct.Struct("<HHHHIIBBQ")
_E2E = struct.Struct("<HHIBQ")
_LEN = struct.Struct("<I")
_TAG = struct.Struct("<Q")
_CRC = struct.Struct("<I")
_KN = struct.Struct("<QQ")


class Priority(enum.IntEnum):
    Critical = 0
    Normal = 1


class FrameError(Exception):
    """Base class for frames rejected by :func:`open_frame`."""


class CrcError(FrameError):
    pass


class AuthError(FrameError):
    pass


class ReplayError(FrameError):
    pass


class PayloadTooLarge(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class FrameHeader:
    origin: int
    dest: int
    hop_src: int
    hop_dst: int
    app_seq: int
    hop_seq: int
    priority: int
    ttl: int
    nonce: int

    def encode(self) -> bytes:
        return _HDR.pack(
            self.origin, self.dest, self.hop_src, self.hop_dst,
            self.app_seq, self.hop_seq, self.priority, self.ttl, self.nonce,
        )

    def encode_e2e(self) -> bytes:
        return _E2E.pack(self.origin, self.dest, self.app_seq, self.priority, self.nonce)


@dataclass(frozen=True, slots=True)
class WirePacket:
    header: FrameHeader
    ciphertext: bytes
    tag: int
    crc: int

    def body(self) -> bytes:
        """Bytes covered by the CRC."""
        return (
            self.header.encode()
            + _LEN.pack(len(self.ciphertext))
            + self.ciphertext
            + _TAG.pack(self.tag)
        )

    def to_bytes(self) -> bytes:
        return self.body() + _CRC.pack(self.crc)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WirePacket":
        """Parse a wire frame; malformed framing is reported as :class:`CrcError`."""
        hs = _HDR.size
        if len(data) < hs + _LEN.size + _TAG.size + _CRC.size:
            raise CrcError("frame too short")
        (n,) = _LEN.unpack_from(data, hs)
        if len(data) != hs + _LEN.size + n + _TAG.size + _CRC.size:
            raise CrcError("length prefix does not match frame size")
        header = FrameHeader(*_HDR.unpack_from(data, 0))
        off = hs + _LEN.size
        ct = bytes(data[off : off + n])
        (tag,) = _TAG.unpack_from(data, off + n)
        (crc,) = _CRC.unpack_from(data, off + n + _TAG.size)
        return cls(header, ct, tag, crc)

    def with_hop(self, **changes) -> "WirePacket":
        """Rewrite hop fields and recompute the CRC (the tag is untouched)."""
        return reframe(replace(self, header=replace(self.header, **changes)))

    def __len__(self) -> int:
        return _HDR.size + _LEN.size + len(self.ciphertext) + _TAG.size + _CRC.size


def prf64(key: int, nonce: int, index: int) -> int:
    return _prf64(key, nonce, index)


def compute_tag(header: FrameHeader, ciphertext: bytes, key: int) -> int:
    return fnv1a64(_KN.pack(key, header.nonce) + header.encode_e2e() + ciphertext)


def reframe(w: WirePacket) -> WirePacket:
    """Return ``w`` with a freshly computed CRC."""
    return replace(w, crc=crc32(w.body()))


def seal(header: FrameHeader, payload: bytes, key: int, payload_max: int = PAYLOAD_MAX) -> WirePacket:
    if len(payload) > payload_max:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {payload_max}")
    ct = keystream_xor(payload, key, header.nonce)
    w = WirePacket(header, ct, compute_tag(header, ct, key), 0)
    return reframe(w)


class ReplayWindow:
    """Per-origin anti-replay state kept at the final destination.

    ``highest[origin]`` is the largest accepted ``app_seq`` and never
    decreases. Sequence numbers up to ``span`` below it are accepted once, so
    packets reordered by priority queues or route changes are not rejected.
    """

    def __init__(self, span: int = 1 << 16) -> None:
        self.span = span
        self.highest: dict[int, int] = {}
        self._seen: dict[int, set[int]] = {}

    def check(self, origin: int, app_seq: int) -> None:
        hi = self.highest.get(origin)
        if hi is None or app_seq > hi:
            return
        if app_seq <= hi - self.span or app_seq in self._seen[origin]:
            raise ReplayError(f"replayed app_seq {app_seq} from origin {origin}")

    def accept(self, origin: int, app_seq: int) -> None:
        seen = self._seen.setdefault(origin, set())
        seen.add(app_seq)
        hi = self.highest.get(origin)
        if hi is None or app_seq > hi:
            self.highest[origin] = app_seq
            floor = app_seq - self.span
            if len(seen) > 2 * self.span:
                self._seen[origin] = {s for s in seen if s > floor}


def open_frame(w: WirePacket, key: int, window: ReplayWindow | None = None) -> bytes:
    """Verify and decrypt ``w``.

    Checks run CRC, then tag, then replay; the replay check only applies
    when ``window`` is given (i.e. at the final destination), and success
    records the sequence number in it.
    """
    if crc32(w.body()) != w.crc:
        raise CrcError("crc mismatch")
    if compute_tag(w.header, w.ciphertext, key) != w.tag:
        raise AuthError("authentication tag mismatch")
    if window is not None:
        window.check(w.header.origin, w.header.app_seq)
    payload = keystream_xor(w.ciphertext, key, w.header.nonce)
    if window is not None:
        window.accept(w.header.origin, w.header.app_seq)
    return payload


def open_bytes(data: bytes, key: int, window: ReplayWindow | None = None) -> bytes:
    return open_frame(WirePacket.from_bytes(data), key, window)


# -- stop-and-wait ARQ ------------------------------------------------------


class ArqEvent(enum.Enum):
    AckReceived = "ack"
    Timeout = "timeout"


class ArqAction(enum.Enum):
    CancelTimer = "cancel"
    Retransmit = "retransmit"
    GiveUp = "give_up"


@dataclass(frozen=True, slots=True)
class ArqState:
    attempts: int
    timeout_at: int
    retry_limit: int = 3
    ack_timeout: int = 4

    def __post_init__(self) -> None:
        if self.ack_timeout < 1 or self.retry_limit < 0:
            raise ValueError("ack_timeout must be >= 1 and retry_limit >= 0")
        if self.attempts > self.retry_limit + 1:
            raise ValueError("attempts exceeds retry_limit + 1")


def arq_start(now: int, retry_limit: int, ack_timeout: int) -> ArqState:
    """State after the first transmission of a frame."""
    return ArqState(1, now + ack_timeout, retry_limit, ack_timeout)


def arq_step(st: ArqState, event: ArqEvent, now: int) -> tuple[ArqAction, ArqState]:
    if event is ArqEvent.AckReceived:
        return ArqAction.CancelTimer, st
    if st.attempts <= st.retry_limit:
        return ArqAction.Retransmit, replace(st, attempts=st.attempts + 1, timeout_at=now + st.ack_timeout)
    return ArqAction.GiveUp, st


def hop_delivery_probability(loss: float, retry_limit: int) -> float:
    """Probability that at least one of ``retry_limit + 1`` attempts gets through."""
    return 1.0 - loss ** (retry_limit + 1)
