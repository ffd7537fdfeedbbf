"""Mutual information of a consistent Gaussian LLR and its inverse.

Uses the closed-form fit ``J(s) = (1 - 2**(-H1 * s**(2*H2)))**H3`` together
with its exact algebraic inverse, so the round trip is exact up to float
round-off.
"""

from __future__ import annotations

import numpy as np

H1 = 0.3073
H2 = 0.8935
H3 = 1.1064

#: largest sigma returned by the inverse; J(SIGMA_MAX) rounds to 1
SIGMA_MAX = 60.0


def j_function(sigma):
    s = np.maximum(np.asarray(sigma, dtype=float), 0.0)
    out = (1.0 - np.power(2.0, -H1 * s ** (2.0 * H2))) ** H3
    return out if out.ndim else float(out)


def j_inverse(mi):
    """Sigma with ``j_function(sigma) == mi``; MI at or above 1 saturates to SIGMA_MAX."""
    x = np.clip(np.asarray(mi, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = 1.0 - x ** (1.0 / H3)
        s = (-np.log2(inner) / H1) ** (1.0 / (2.0 * H2))
    s = np.where(inner <= 0.0, SIGMA_MAX, np.minimum(s, SIGMA_MAX))
    return s if s.ndim else float(s)
