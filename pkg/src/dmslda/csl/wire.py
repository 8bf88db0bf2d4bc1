"""Binary codec for protocol messages.

Body layout::

    b"DMSL" | version (u8) | kind (u8) | round (u32 BE) | payload

Matrices are ``rows (u32 BE) | cols (u32 BE) | rows*cols float64 LE``,
row-major. Integers are big-endian, floats little-endian. Over TCP each
body is preceded by its length as a u64 BE.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from ..core import TransportFailure

MAGIC = b"DMSL"
VERSION = 1
HEADER = struct.Struct(">4sBBI")
HEADER_SIZE = HEADER.size  # 10
FRAME = struct.Struct(">Q")
_U32 = struct.Struct(">I")
_DIMS = struct.Struct(">II")
_F64 = np.dtype("<f8")
_U64 = np.dtype(">u8")


class Kind(enum.IntEnum):
    BROADCAST_CANDIDATES = 1
    GRADIENT_AND_LOSS_REPLY = 2
    FINAL_MODEL = 3
    PROJECTED_STATS_REQUEST = 4
    PROJECTED_STATS_REPLY = 5


def empty_matrix() -> np.ndarray:
    return np.zeros((0, 0))


@dataclass(frozen=True, eq=False)
class BroadcastCandidates:
    """Candidate models to score, plus the model whose gradient is requested.

    ``anchor`` may be the 0x0 matrix when no gradient is needed.
    """

    round: int
    candidates: tuple
    anchor: np.ndarray

    kind = Kind.BROADCAST_CANDIDATES


@dataclass(frozen=True, eq=False)
class GradientAndLossReply:
    """Gradient at the anchor and losses at each candidate, then at the anchor."""

    round: int
    gradient: np.ndarray
    losses: np.ndarray

    kind = Kind.GRADIENT_AND_LOSS_REPLY


@dataclass(frozen=True, eq=False)
class FinalModel:
    round: int
    w: np.ndarray
    proj_means: np.ndarray
    proj_cov: np.ndarray
    log_priors: np.ndarray

    kind = Kind.FINAL_MODEL


@dataclass(frozen=True, eq=False)
class ProjectedStatsRequest:
    round: int
    w: np.ndarray

    kind = Kind.PROJECTED_STATS_REQUEST


@dataclass(frozen=True, eq=False)
class ProjectedStatsReply:
    """``W^T mu_k`` as rows, ``W^T S W``, and per-class sample counts."""

    round: int
    proj_means: np.ndarray
    proj_cov: np.ndarray
    class_counts: np.ndarray

    kind = Kind.PROJECTED_STATS_REPLY


Message = (
    BroadcastCandidates
    | GradientAndLossReply
    | FinalModel
    | ProjectedStatsRequest
    | ProjectedStatsReply
)


def matrix_size(rows: int, cols: int) -> int:
    return _DIMS.size + 8 * rows * cols


def _put_matrix(out: list, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    out.append(_DIMS.pack(*m.shape))
    out.append(np.ascontiguousarray(m, dtype=_F64).tobytes())


def _put_scalars(out: list, values) -> None:
    out.append(np.ascontiguousarray(values, dtype=_F64).tobytes())


def encode(msg: Message) -> bytes:
    out = [HEADER.pack(MAGIC, VERSION, int(msg.kind), int(msg.round))]
    if isinstance(msg, BroadcastCandidates):
        out.append(_U32.pack(len(msg.candidates)))
        for c in msg.candidates:
            _put_matrix(out, c)
        _put_matrix(out, msg.anchor)
    elif isinstance(msg, GradientAndLossReply):
        _put_matrix(out, msg.gradient)
        _put_scalars(out, msg.losses)
    elif isinstance(msg, FinalModel):
        _put_matrix(out, msg.w)
        _put_matrix(out, msg.proj_means)
        _put_matrix(out, msg.proj_cov)
        _put_matrix(out, np.asarray(msg.log_priors).reshape(-1, 1))
    elif isinstance(msg, ProjectedStatsRequest):
        _put_matrix(out, msg.w)
    elif isinstance(msg, ProjectedStatsReply):
        counts = np.asarray(msg.class_counts)
        out.append(_U32.pack(counts.size))
        out.append(counts.astype(_U64).tobytes())
        _put_matrix(out, msg.proj_means)
        _put_matrix(out, msg.proj_cov)
    else:
        raise TypeError(f"not a protocol message: {type(msg).__name__}")
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise TransportFailure(
                f"truncated message: need {n} bytes at offset {self.pos}, have {len(self.buf)}"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def matrix(self) -> np.ndarray:
        rows, cols = _DIMS.unpack(self.take(_DIMS.size))
        data = np.frombuffer(self.take(8 * rows * cols), dtype=_F64)
        return data.astype(np.float64).reshape(rows, cols)

    def scalars(self) -> np.ndarray:
        rest = len(self.buf) - self.pos
        if rest % 8:
            raise TransportFailure(f"trailing scalar block of {rest} bytes is not a multiple of 8")
        return np.frombuffer(self.take(rest), dtype=_F64).astype(np.float64)

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise TransportFailure(f"{len(self.buf) - self.pos} unexpected trailing bytes")


def decode(body: bytes) -> Message:
    if len(body) < HEADER_SIZE:
        raise TransportFailure(f"message of {len(body)} bytes is shorter than the header")
    magic, version, kind, rnd = HEADER.unpack_from(body)
    if magic != MAGIC:
        raise TransportFailure(f"bad magic {magic!r}")
    if version != VERSION:
        raise TransportFailure(f"unsupported protocol version {version}")
    try:
        kind = Kind(kind)
    except ValueError:
        raise TransportFailure(f"unknown message kind {kind}") from None
    r = _Reader(body)
    r.pos = HEADER_SIZE
    if kind is Kind.BROADCAST_CANDIDATES:
        count = r.u32()
        cands = tuple(r.matrix() for _ in range(count))
        msg = BroadcastCandidates(rnd, cands, r.matrix())
    elif kind is Kind.GRADIENT_AND_LOSS_REPLY:
        grad = r.matrix()
        msg = GradientAndLossReply(rnd, grad, r.scalars())
    elif kind is Kind.FINAL_MODEL:
        w, means, cov, priors = (r.matrix() for _ in range(4))
        msg = FinalModel(rnd, w, means, cov, priors.ravel())
    elif kind is Kind.PROJECTED_STATS_REQUEST:
        msg = ProjectedStatsRequest(rnd, r.matrix())
    else:
        k = r.u32()
        counts = np.frombuffer(r.take(8 * k), dtype=_U64).astype(np.int64)
        means = r.matrix()
        msg = ProjectedStatsReply(rnd, means, r.matrix(), counts)
    r.done()
    return msg

