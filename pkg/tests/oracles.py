"""Independent reference computations used to freeze expected values.

Nothing here imports the estimators, demappers or graph code under test; only
plain numpy/scipy and the point sets themselves.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from itertools import combinations

import numpy as np
from scipy import integrate


def qpsk_points(phase=0.0):
    return np.exp(1j * (np.pi / 2 * np.arange(4) + phase))


def _gh(order):
    x, w = np.polynomial.hermite.hermgauss(order)
    # E[f(Z)] for Z ~ N(0, s^2): sum w f(sqrt(2) s x) / sqrt(pi)
    return x, w / np.sqrt(np.pi)


def two_user_mi_quadrature(p1, p2, gamma2, snr_db, order=64):
    """I(x1;y), I(x1;y|x2) and I(x1,x2;y) in bits by 2-D Gauss-Hermite quadrature.

    Uniform independent inputs, y = x1 + gamma2 x2 + w, w ~ CN(0, N), N = 10^(-snr/10).
    """
    N = 10.0 ** (-snr_db / 10.0)
    x, w = _gh(order)
    s = np.sqrt(N / 2.0)
    zr, zi = np.meshgrid(np.sqrt(2.0) * s * x, np.sqrt(2.0) * s * x, indexing="ij")
    ww = np.outer(w, w)
    z = zr + 1j * zi
    M1, M2 = len(p1), len(p2)
    pts = np.array([[a + gamma2 * b for b in p2] for a in p1])  # (M1, M2)
    I_x1 = I_1 = I_J = 0.0
    for a in range(M1):
        for b in range(M2):
            y = pts[a, b] + z
            lik = np.exp(-np.abs(y[..., None, None] - pts[None, None]) ** 2 / N)  # (.., M1, M2)
            own = lik[..., a, b]
            p_all = lik.mean(axis=(-1, -2))
            p_given_x2 = lik[..., :, b].mean(axis=-1)
            p_given_x1 = lik[..., a, :].mean(axis=-1)
            I_J += np.sum(ww * np.log2(own / p_all))
            I_1 += np.sum(ww * np.log2(own / p_given_x2))
            I_x1 += np.sum(ww * np.log2(p_given_x1 / p_all))
    k = M1 * M2
    return {"I_x1": I_x1 / k, "I1": I_1 / k, "I_J": I_J / k}


def single_user_mi_quadrature(points, snr_db, order=64, scale=1.0):
    """Constellation-constrained MI of ``scale * points`` in CN(0, N) noise."""
    q = np.asarray(points) * scale
    N = 10.0 ** (-snr_db / 10.0)
    x, w = _gh(order)
    s = np.sqrt(N / 2.0)
    zr, zi = np.meshgrid(np.sqrt(2.0) * s * x, np.sqrt(2.0) * s * x, indexing="ij")
    ww = np.outer(w, w)
    z = zr + 1j * zi
    tot = 0.0
    for a in range(len(q)):
        y = q[a] + z
        d = -np.abs(y[..., None] - q[None, None]) ** 2 / N
        m = d.max(axis=-1, keepdims=True)
        lse = m[..., 0] + np.log(np.exp(d - m).sum(axis=-1))
        tot += np.sum(ww * (np.log2(len(q)) + (d[..., a] - lse) / np.log(2)))
    return tot / len(q)


def brute_force_llrs(y, points, labels, nbits, noise_var, priors=None, clamp=50.0):
    """Extrinsic LLRs by explicit enumeration with Python floats."""
    out = np.zeros((len(y), nbits))
    for n, yn in enumerate(y):
        for k in range(nbits):
            num, den = [], []
            for p, lab in zip(points, labels):
                bits = [(int(lab) >> (nbits - 1 - j)) & 1 for j in range(nbits)]
                t = -abs(yn - p) ** 2 / noise_var
                if priors is not None:
                    for j in range(nbits):
                        if j != k:
                            La = max(-clamp, min(clamp, float(priors[n][j])))
                            t += 0.5 * La * (1 - 2 * bits[j])
                (num if bits[k] == 0 else den).append(t)
            mn, md = max(num), max(den)
            ln = mn + math.log(math.fsum(math.exp(v - mn) for v in num))
            ld = md + math.log(math.fsum(math.exp(v - md) for v in den))
            out[n, k] = max(-clamp, min(clamp, ln - ld))
    return out


def tanner_girth(n, checks):
    """Girth of the Tanner graph by BFS from every node (plain Python)."""
    adj = {("v", v): [] for v in range(n)}
    for c, vs in enumerate(checks):
        adj[("c", c)] = [("v", int(v)) for v in vs]
        for v in vs:
            adj[("v", int(v))].append(("c", c))
    best = math.inf
    for src in adj:
        dist = {src: 0}
        parent = {src: None}
        q = deque([src])
        while q:
            u = q.popleft()
            if 2 * dist[u] >= best:
                break
            for x in adj[u]:
                if x not in dist:
                    dist[x] = dist[u] + 1
                    parent[x] = u
                    q.append(x)
                elif parent[u] != x:
                    best = min(best, dist[u] + dist[x] + 1)
    return best


def has_four_cycle(n, checks):
    """True when two checks share two or more variables."""
    seen = Counter()
    var_checks = [[] for _ in range(n)]
    for c, vs in enumerate(checks):
        for v in vs:
            var_checks[int(v)].append(c)
    for cs in var_checks:
        for a, b in combinations(sorted(cs), 2):
            seen[(a, b)] += 1
            if seen[(a, b)] > 1:
                return True
    return False


def numeric_j(sigma):
    """MI of a consistent Gaussian LLR by numerical integration."""
    if sigma < 1e-8:
        return 0.0
    mu = sigma**2 / 2

    def f(l):
        return math.exp(-((l - mu) ** 2) / (2 * sigma**2)) / math.sqrt(2 * math.pi) / sigma * math.log2(1 + math.exp(-l))

    val, _ = integrate.quad(f, mu - 12 * sigma, mu + 12 * sigma, limit=200)
    return 1.0 - val


def gf2_rank(H):
    A = (np.asarray(H) % 2).astype(np.uint8).copy()
    r = 0
    for c in range(A.shape[1]):
        piv = np.flatnonzero(A[r:, c])
        if piv.size == 0:
            continue
        p = r + piv[0]
        A[[r, p]] = A[[p, r]]
        rows = np.flatnonzero(A[:, c])
        rows = rows[rows != r]
        A[rows] ^= A[r]
        r += 1
        if r == A.shape[0]:
            break
    return r
