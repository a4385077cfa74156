"""Length-prefixed binary frames exchanged between master and workers.

Frame layout (all little-endian)::

    u32  length of everything that follows
    u8   message type (1 LOAD_SHARDS, 2 WEIGHTS, 3 RESULT, 4 STOP)
    u32  iteration index
    u32  worker id
    u8   ndim
    u32  dims[ndim]
    f64  data[...]

The float count is ``prod(dims)`` (zero when ``ndim == 0``). A LOAD_SHARDS
frame with shape ``(r, d, cols)`` carries the ``r * d * cols`` shard entries
followed by ``r`` combination weights. An empty LOAD_SHARDS frame from a
worker is its hello (before loading) or its acknowledgement (after).
"""
from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

PREFIX = struct.Struct("<I")
HEADER = struct.Struct("<BIIB")
MAX_FRAME = 1 << 31


class MsgType(IntEnum):
    LOAD_SHARDS = 1
    WEIGHTS = 2
    RESULT = 3
    STOP = 4


class ProtocolError(Exception):
    def __init__(self, message: str, offset: int, data: bytes = b""):
        self.offset = offset
        self.data = data
        snippet = data[offset:offset + 16].hex()
        super().__init__(f"{message} at byte offset {offset} (bytes: {snippet or '<end>'})")


@dataclass
class WireMessage:
    type: MsgType
    iteration: int = 0
    worker_id: int = 0
    shape: tuple[int, ...] = ()
    data: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.type = MsgType(self.type)
        self.shape = tuple(int(s) for s in self.shape)
        self.data = np.ascontiguousarray(self.data, dtype="<f8").reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, WireMessage):
            return NotImplemented
        return (self.type == other.type and self.iteration == other.iteration
                and self.worker_id == other.worker_id and self.shape == other.shape
                and self.data.tobytes() == other.data.tobytes())


def float_count(type_: MsgType, shape: tuple[int, ...]) -> int:
    if not shape:
        return 0
    count = int(np.prod(shape))
    if type_ is MsgType.LOAD_SHARDS:
        count += shape[0]
    return count


def encode(msg: WireMessage) -> bytes:
    expected = float_count(msg.type, msg.shape)
    if msg.data.size != expected:
        raise ValueError(f"{msg.type.name} with shape {msg.shape} needs {expected} floats, "
                         f"got {msg.data.size}")
    body = (HEADER.pack(int(msg.type), msg.iteration, msg.worker_id, len(msg.shape))
            + struct.pack(f"<{len(msg.shape)}I", *msg.shape)
            + msg.data.astype("<f8").tobytes())
    return PREFIX.pack(len(body)) + body


def decode(frame: bytes) -> WireMessage:
    """Parse one complete frame, prefix included."""
    if len(frame) < PREFIX.size:
        raise ProtocolError("truncated length prefix", len(frame), frame)
    (length,) = PREFIX.unpack_from(frame, 0)
    if length != len(frame) - PREFIX.size:
        raise ProtocolError(f"length prefix says {length}, frame has {len(frame) - PREFIX.size}", 0, frame)
    return decode_body(frame[PREFIX.size:], base=PREFIX.size, whole=frame)


def decode_body(body: bytes, base: int = 0, whole: bytes | None = None) -> WireMessage:
    whole = body if whole is None else whole
    if len(body) < HEADER.size:
        raise ProtocolError("truncated header", base + len(body), whole)
    type_b, iteration, worker_id, ndim = HEADER.unpack_from(body, 0)
    try:
        type_ = MsgType(type_b)
    except ValueError:
        raise ProtocolError(f"unknown message type {type_b}", base, whole) from None
    pos = HEADER.size
    if len(body) < pos + 4 * ndim:
        raise ProtocolError("truncated shape", base + len(body), whole)
    shape = struct.unpack_from(f"<{ndim}I", body, pos)
    pos += 4 * ndim
    rest = len(body) - pos
    expected = float_count(type_, shape)
    if rest != 8 * expected:
        raise ProtocolError(f"{type_.name} with shape {shape} needs {8 * expected} payload bytes, "
                            f"found {rest}", base + pos, whole)
    data = np.frombuffer(body, dtype="<f8", count=expected, offset=pos).astype(np.float64)
    return WireMessage(type_, iteration, worker_id, shape, data)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None if not buf else bytes(buf)
        buf += chunk
    return bytes(buf)


def read_message(sock: socket.socket) -> WireMessage | None:
    """Next message from ``sock``; None on a clean close between frames."""
    head = _recv_exact(sock, PREFIX.size)
    if head is None:
        return None
    if len(head) < PREFIX.size:
        raise ProtocolError("connection closed inside length prefix", len(head), head)
    (length,) = PREFIX.unpack(head)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame length {length} exceeds limit", 0, head)
    body = _recv_exact(sock, length) or b""
    if len(body) < length:
        raise ProtocolError(f"connection closed after {len(body)} of {length} body bytes",
                            PREFIX.size + len(body), head + body)
    return decode_body(body, base=PREFIX.size, whole=head + body)


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    sock.sendall(encode(msg))


def shards_message(worker_id: int, shards: np.ndarray, combo: np.ndarray | None) -> WireMessage:
    r = shards.shape[0]
    combo = np.ones(r) if combo is None else np.asarray(combo, dtype=np.float64)
    data = np.concatenate([shards.reshape(-1), combo])
    return WireMessage(MsgType.LOAD_SHARDS, 0, worker_id, shards.shape, data)


def unpack_shards(msg: WireMessage) -> tuple[np.ndarray, np.ndarray]:
    n_sh = int(np.prod(msg.shape))
    return msg.data[:n_sh].reshape(msg.shape), msg.data[n_sh:]
