"""Gaussian-approximation EXIT functions of variable and check nodes."""

from __future__ import annotations

import numpy as np

from ..jfunc import j_function, j_inverse
from .distributions import DegreeDistribution


def vnd_exit(degree: int, I_A, I_ch):
    """Extrinsic MI on an edge of a degree-``degree`` variable node."""
    sa = j_inverse(I_A)
    sc = j_inverse(I_ch)
    return j_function(np.sqrt((degree - 1) * np.square(sa) + np.square(sc)))


def cnd_exit(degree: int, I_A):
    """Extrinsic MI on an edge of a degree-``degree`` check node (duality approximation)."""
    return 1.0 - j_function(np.sqrt(degree - 1) * j_inverse(1.0 - np.asarray(I_A, dtype=float)))


def _edge_cnd(dist: DegreeDistribution, I_A):
    return sum(w * cnd_exit(d, I_A) for d, w in dist.cn_edge_fractions())


def _edge_vnd(dist: DegreeDistribution, I_A, I_ch):
    return sum(w * vnd_exit(d, I_A, I_ch) for d, w in dist.vn_edge_fractions())


def decoder_exit(
    dist: DegreeDistribution,
    I_ch,
    max_iters: int = 500,
    tol: float = 1e-9,
) -> np.ndarray:
    """Extrinsic MI the decoder returns to the detector.

    The decoder receives bit-level MI ``I_ch`` from the detector, iterates its
    own VND/CND loop to a fixed point, and reports the MI of the extrinsic
    LLRs of each variable node (all its check messages combined), averaged
    over nodes.
    """
    I_ch = np.atleast_1d(np.asarray(I_ch, dtype=float))
    x = np.zeros_like(I_ch)  # check-to-variable MI
    for _ in range(max_iters):
        v = _edge_vnd(dist, x, I_ch)
        x_new = _edge_cnd(dist, v)
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x = x_new
    sx = j_inverse(x)
    out = sum(f * j_function(np.sqrt(d) * sx) for d, f in dist.vnd)
    return np.asarray(out)


def decoder_passes(dist: DegreeDistribution, I_ch, max_iters: int = 500, tol: float = 1e-9) -> np.ndarray:
    """Fixed-point check-to-variable MI of the internal decoder loop."""
    I_ch = np.atleast_1d(np.asarray(I_ch, dtype=float))
    x = np.zeros_like(I_ch)
    for _ in range(max_iters):
        x_new = _edge_cnd(dist, _edge_vnd(dist, x, I_ch))
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        x = x_new
    return x


def bpsk_threshold_db(dist: DegreeDistribution, lo: float = -5.0, hi: float = 10.0, tol: float = 1e-3) -> float:
    """Es/N0 (dB) above which density evolution under the Gaussian approximation converges on BPSK/AWGN."""
    from ..jfunc import j_function as J

    def ok(es_db):
        sigma_ch = np.sqrt(8.0 * 10 ** (es_db / 10.0))
        I_ch = J(sigma_ch)
        return float(decoder_passes(dist, I_ch, max_iters=5000)[0]) > 0.999

    if not ok(hi):
        return float("inf")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
