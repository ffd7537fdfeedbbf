"""Systematic encoding through GF(2) elimination of the parity-check matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ..errors import ConstructionError, InvalidParameterError


@nb.njit(cache=True)
def _rref(A, ncols):
    """In-place reduced row echelon form of a bit-packed matrix.

    Returns the pivot column of each of the first ``rank`` rows.
    """
    m, W = A.shape
    pivots = np.empty(min(m, ncols), np.int64)
    r = 0
    for col in range(ncols):
        if r == m:
            break
        w = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        p = -1
        for i in range(r, m):
            if A[i, w] & bit:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(W):
                tmp = A[r, j]
                A[r, j] = A[p, j]
                A[p, j] = tmp
        for i in range(m):
            if i != r and (A[i, w] & bit):
                for j in range(w, W):
                    A[i, j] ^= A[r, j]
        pivots[r] = col
        r += 1
    return pivots[:r]


@nb.njit(cache=True)
def _parity(P, msg_packed, out):
    rank, W = P.shape
    for i in range(rank):
        acc = np.uint64(0)
        for j in range(W):
            acc ^= P[i, j] & msg_packed[j]
        # popcount parity
        acc ^= acc >> np.uint64(32)
        acc ^= acc >> np.uint64(16)
        acc ^= acc >> np.uint64(8)
        acc ^= acc >> np.uint64(4)
        acc ^= acc >> np.uint64(2)
        acc ^= acc >> np.uint64(1)
        out[i] = np.uint8(acc & np.uint64(1))


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Little-endian packing of a 0/1 vector (or rows) into uint64 words."""
    b = np.asarray(bits, dtype=np.uint8)
    n = b.shape[-1]
    W = (n + 63) // 64
    pad = np.zeros(b.shape[:-1] + (W * 64,), dtype=np.uint8)
    pad[..., :n] = b
    by = np.packbits(pad.reshape(b.shape[:-1] + (W * 8, 8)), axis=-1, bitorder="little")
    return np.ascontiguousarray(by.reshape(b.shape[:-1] + (W * 8,))).view(np.uint64)


@dataclass(frozen=True, eq=False)
class SystematicEncoder:
    """Parity bits as GF(2) dot products of the message with rows of ``P``.

    ``info_pos`` holds the codeword positions that carry message bits in
    order; ``parity_pos[i]`` is the position set from row ``i`` of ``P``.
    """

    n: int
    info_pos: np.ndarray
    parity_pos: np.ndarray
    P: np.ndarray

    @property
    def k(self) -> int:
        return self.info_pos.size

    def encode(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.uint8)
        if msg.ndim == 2:
            return np.stack([self.encode(r) for r in msg])
        if msg.size != self.k:
            raise InvalidParameterError(f"message length must be {self.k}")
        cw = np.zeros(self.n, dtype=np.uint8)
        cw[self.info_pos] = msg
        par = np.empty(self.parity_pos.size, dtype=np.uint8)
        _parity(self.P, pack_bits(msg), par)
        cw[self.parity_pos] = par
        return cw


def build_encoder(code) -> SystematicEncoder:
    """Eliminate H to reduced echelon form.

    Pivot columns become parity positions and the rest carry the message.
    Redundant checks (rank deficiency) simply enlarge the message.
    """
    H = code.dense()
    A = pack_bits(H).copy()
    pivots = _rref(A, code.n)
    rank = pivots.size
    if rank == 0:
        raise ConstructionError("parity-check matrix has rank 0")
    is_piv = np.zeros(code.n, dtype=bool)
    is_piv[pivots] = True
    info = np.flatnonzero(~is_piv)
    # unpack the reduced rows and keep the message columns
    R = np.unpackbits(A[:rank].view(np.uint8), axis=1, bitorder="little")[:, : code.n]
    P = pack_bits(R[:, info])
    return SystematicEncoder(code.n, info.astype(np.int64), pivots.astype(np.int64), np.ascontiguousarray(P))
