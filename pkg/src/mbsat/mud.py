"""Soft-in soft-out symbol demappers.

LLRs use the natural log with ``L = log P(b=0) / P(b=1)``, so positive values
favour bit 0.  All outputs are extrinsic: the a-priori LLR of a bit never
enters its own output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constellation import Constellation, JointConstellation, joint_constellation, label_bits

LLR_CLAMP = 50.0


@dataclass(frozen=True)
class SoftBits:
    """Extrinsic LLRs, shape ``(n_symbols, bits_per_symbol)``."""

    llrs: np.ndarray

    def hard(self) -> np.ndarray:
        return (self.llrs < 0).astype(np.uint8)


def gaussian_log_metric(y: np.ndarray, points: np.ndarray, noise_var: float) -> np.ndarray:
    """``-|y - x|^2 / noise_var`` for every sample/point pair, shape (n, M)."""
    return -np.abs(y[:, None] - points[None, :]) ** 2 / noise_var


def demap(
    y,
    points: np.ndarray,
    bit_matrix: np.ndarray,
    noise_var: float,
    priors=None,
    max_log: bool = False,
) -> np.ndarray:
    """Extrinsic bit LLRs for a labeled alphabet.

    Parameters
    ----------
    y : complex array (n,)
    points : complex array (M,)
    bit_matrix : (M, m) array of 0/1, label bits of each point
    noise_var : metric noise variance
    priors : (n, m) a-priori LLRs or None
    max_log : replace log-sum-exp by max

    Returns
    -------
    (n, m) float array clamped to +-LLR_CLAMP
    """
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    n = y.size
    B = np.asarray(bit_matrix, dtype=np.int64)
    m = B.shape[1]
    metric = gaussian_log_metric(y, np.asarray(points), noise_var)
    sgn = 1.0 - 2.0 * B  # +1 for bit 0
    if priors is None:
        La = np.zeros((n, m))
    else:
        La = np.clip(np.asarray(priors, dtype=float).reshape(n, m), -LLR_CLAMP, LLR_CLAMP)
    # log P(c) up to a per-bit constant is (1-2c) L / 2
    prior_terms = 0.5 * La[:, None, :] * sgn[None, :, :]  # (n, M, m)
    total = metric + prior_terms.sum(axis=2)
    reduce = (lambda a, axis: a.max(axis=axis)) if max_log else (lambda a, axis: logsumexp(a, axis=axis))
    out = np.empty((n, m))
    for k in range(m):
        t = total - prior_terms[:, :, k]
        zero = B[:, k] == 0
        out[:, k] = reduce(t[:, zero], 1) - reduce(t[:, ~zero], 1)
    return np.clip(out, -LLR_CLAMP, LLR_CLAMP)


def sud_demap(y, c1: Constellation, effective_noise_var: float, priors1=None, max_log: bool = False) -> SoftBits:
    """Single-signal demapper; interference power belongs in ``effective_noise_var``."""
    return SoftBits(demap(y, c1.points, c1.bit_matrix, effective_noise_var, priors1, max_log))


def mud2_demap_joint(
    y, joint: JointConstellation, noise_var: float, priors=None, max_log: bool = False
) -> SoftBits:
    """Joint demapper over a two-signal alphabet with arbitrary joint labels.

    Output columns follow the joint label bits, user-1 bits first.
    """
    return SoftBits(demap(y, joint.points, joint.bit_matrix, noise_var, priors, max_log))


def mud2_demap(
    y,
    c1: Constellation,
    c2: Constellation,
    gamma2: complex,
    noise_var: float,
    priors1=None,
    priors2=None,
    max_log: bool = False,
) -> tuple[SoftBits, SoftBits]:
    """MAP demapper over all ``M1*M2`` hypotheses ``x1 + gamma2*x2``."""
    joint = joint_constellation(c1, c2, gamma2)
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    n, m1, m2 = y.size, c1.bits_per_symbol, c2.bits_per_symbol
    p1 = np.zeros((n, m1)) if priors1 is None else np.asarray(priors1, dtype=float).reshape(n, m1)
    p2 = np.zeros((n, m2)) if priors2 is None else np.asarray(priors2, dtype=float).reshape(n, m2)
    L = demap(y, joint.points, joint.bit_matrix, noise_var, np.hstack([p1, p2]), max_log)
    return SoftBits(L[:, :m1]), SoftBits(L[:, m1:])


def bit_mi(llrs: np.ndarray, bits: np.ndarray) -> float:
    """Average MI between bits and their LLRs, ``1 - E[log2(1 + exp(-L(1-2b)))]``."""
    z = -np.asarray(llrs, dtype=float) * (1.0 - 2.0 * np.asarray(bits, dtype=float))
    return float(1.0 - np.mean(np.logaddexp(0.0, z)) / np.log(2.0))


__all__ = [
    "LLR_CLAMP",
    "SoftBits",
    "bit_mi",
    "demap",
    "gaussian_log_metric",
    "label_bits",
    "mud2_demap",
    "mud2_demap_joint",
    "sud_demap",
]
