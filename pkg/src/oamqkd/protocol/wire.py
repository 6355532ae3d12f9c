"""Classical-channel wire format.

Each frame is a 4-byte big-endian payload length, a 1-byte message type and
the payload.  Integers inside payloads are big-endian; bit vectors are
packed MSB-first with ``numpy.packbits`` and preceded by their bit count.

=================  ====  ======================================================
type               code  payload
=================  ====  ======================================================
bases-announce     1     u32 n, packed bases[n], packed single_click[n]
sift-ack           2     u32 n, packed keep[n]
parity-request     3     u32 pass, u32 k, k x (u32 start, u32 end)
parity-response    4     u32 pass, u32 k, packed parities[k]
shuffle-seed       5     u64 key shuffle seed, u64 cascade pass seed
pa-seed            6     u32 n_in, u32 n_out, packed seed[n_in + n_out - 1]
abort              7     u8 phase, utf-8 reason
qber-sample        8     u64 sample seed, u32 k, u8 symbols[k]
reconcile-done     9     u32 parity bits disclosed
key-confirm        10    32-byte SHA-256 digest of the final key
=================  ====  ======================================================
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

HEADER = struct.Struct(">IB")
MAX_PAYLOAD = 1 << 28


class WireError(ValueError):
    pass


class MessageType(IntEnum):
    BASES_ANNOUNCE = 1
    SIFT_ACK = 2
    PARITY_REQUEST = 3
    PARITY_RESPONSE = 4
    SHUFFLE_SEED = 5
    PA_SEED = 6
    ABORT = 7
    QBER_SAMPLE = 8
    RECONCILE_DONE = 9
    KEY_CONFIRM = 10


@dataclass(frozen=True)
class Message:
    type: MessageType
    payload: bytes = b""

    def encode(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD:
            raise WireError(f"payload of {len(self.payload)} bytes exceeds limit")
        return HEADER.pack(len(self.payload), int(self.type)) + self.payload


def decode_header(header: bytes) -> tuple[int, MessageType]:
    if len(header) != HEADER.size:
        raise WireError(f"header must be {HEADER.size} bytes, got {len(header)}")
    length, code = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise WireError(f"declared payload of {length} bytes exceeds limit")
    try:
        return length, MessageType(code)
    except ValueError:
        raise WireError(f"unknown message type {code}") from None


def decode_frame(frame: bytes) -> Message:
    length, mtype = decode_header(frame[:HEADER.size])
    payload = frame[HEADER.size:]
    if len(payload) != length:
        raise WireError(f"frame declares {length} payload bytes, carries {len(payload)}")
    return Message(mtype, bytes(payload))


# -- payload helpers -------------------------------------------------------------

def pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    need = (n + 7) // 8
    if len(data) < need:
        raise WireError(f"need {need} bytes for {n} bits, got {len(data)}")
    return np.unpackbits(np.frombuffer(data[:need], dtype=np.uint8), count=n)


class _Reader:
    def __init__(self, payload: bytes):
        self.buf = payload
        self.pos = 0

    def take(self, fmt: str):
        s = struct.Struct(">" + fmt)
        if self.pos + s.size > len(self.buf):
            raise WireError("truncated payload")
        vals = s.unpack_from(self.buf, self.pos)
        self.pos += s.size
        return vals if len(vals) > 1 else vals[0]

    def bits(self, n: int) -> np.ndarray:
        out = unpack_bits(self.buf[self.pos:], n)
        self.pos += (n + 7) // 8
        return out

    def raw(self, n: int | None = None) -> bytes:
        end = len(self.buf) if n is None else self.pos + n
        if end > len(self.buf):
            raise WireError("truncated payload")
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def done(self):
        if self.pos != len(self.buf):
            raise WireError(f"{len(self.buf) - self.pos} trailing payload bytes")


def bases_announce(bases, clicked) -> Message:
    bases = np.asarray(bases, dtype=np.uint8)
    clicked = np.asarray(clicked, dtype=np.uint8)
    if bases.shape != clicked.shape:
        raise WireError("basis and click vectors differ in length")
    return Message(MessageType.BASES_ANNOUNCE, struct.pack(">I", bases.size) + pack_bits(bases) + pack_bits(clicked))


def sift_ack(keep) -> Message:
    keep = np.asarray(keep, dtype=np.uint8)
    return Message(MessageType.SIFT_ACK, struct.pack(">I", keep.size) + pack_bits(keep))


def parity_request(pass_index: int, ranges) -> Message:
    ranges = list(ranges)
    body = struct.pack(">II", pass_index, len(ranges))
    body += b"".join(struct.pack(">II", s, e) for s, e in ranges)
    return Message(MessageType.PARITY_REQUEST, body)


def parity_response(pass_index: int, parities) -> Message:
    parities = np.asarray(parities, dtype=np.uint8)
    return Message(MessageType.PARITY_RESPONSE, struct.pack(">II", pass_index, parities.size) + pack_bits(parities))


def shuffle_seed(key_seed: int, cascade_seed: int) -> Message:
    return Message(MessageType.SHUFFLE_SEED, struct.pack(">QQ", key_seed, cascade_seed))


def pa_seed(n_in: int, n_out: int, seed_bits) -> Message:
    seed_bits = np.asarray(seed_bits, dtype=np.uint8)
    if seed_bits.size != max(n_in + n_out - 1, 0):
        raise WireError("seed length does not match hash shape")
    return Message(MessageType.PA_SEED, struct.pack(">II", n_in, n_out) + pack_bits(seed_bits))


def abort(phase: int, reason: str) -> Message:
    return Message(MessageType.ABORT, struct.pack(">B", phase) + reason.encode("utf-8"))


def qber_sample(seed: int, symbols) -> Message:
    symbols = np.asarray(symbols, dtype=np.uint8)
    return Message(MessageType.QBER_SAMPLE, struct.pack(">QI", seed, symbols.size) + symbols.tobytes())


def reconcile_done(leaked: int) -> Message:
    return Message(MessageType.RECONCILE_DONE, struct.pack(">I", leaked))


def key_confirm(digest: bytes) -> Message:
    if len(digest) != 32:
        raise WireError("key digest must be 32 bytes")
    return Message(MessageType.KEY_CONFIRM, bytes(digest))


def parse(msg: Message):
    """Decode a payload into Python values according to its type."""
    r = _Reader(msg.payload)
    t = msg.type
    if t is MessageType.BASES_ANNOUNCE:
        n = r.take("I")
        out = (r.bits(n), r.bits(n))
    elif t is MessageType.SIFT_ACK:
        n = r.take("I")
        out = r.bits(n)
    elif t is MessageType.PARITY_REQUEST:
        p, k = r.take("II")
        out = (p, [tuple(r.take("II")) for _ in range(k)])
    elif t is MessageType.PARITY_RESPONSE:
        p, k = r.take("II")
        out = (p, r.bits(k))
    elif t is MessageType.SHUFFLE_SEED:
        out = tuple(r.take("QQ"))
    elif t is MessageType.PA_SEED:
        n_in, n_out = r.take("II")
        out = (n_in, n_out, r.bits(max(n_in + n_out - 1, 0)))
    elif t is MessageType.ABORT:
        phase = r.take("B")
        out = (phase, r.raw().decode("utf-8", errors="replace"))
    elif t is MessageType.QBER_SAMPLE:
        seed, k = r.take("QI")
        out = (seed, np.frombuffer(r.raw(k), dtype=np.uint8).copy())
    elif t is MessageType.RECONCILE_DONE:
        out = r.take("I")
    elif t is MessageType.KEY_CONFIRM:
        out = r.raw(32)
    else:  # pragma: no cover - MessageType is exhaustive
        raise WireError(f"no parser for {t!r}")
    r.done()
    return out
