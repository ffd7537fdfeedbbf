"""Flooding sum-product decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .code import LdpcCode

#: bound on |tanh(L/2)| products before atanh; caps check messages near 35
_TANH_CLIP = 1.0 - 1e-15
_MSG_CLIP = 60.0


@nb.njit(cache=True)
def _spa(llr_ch, check_ptr, check_vars, var_ptr, var_edges, c2v, max_iters):
    n = llr_ch.size
    m = check_ptr.size - 1
    E = check_vars.size
    v2c = np.empty(E)
    post = np.empty(n)
    hard = np.empty(n, np.uint8)
    t = np.empty(E)
    # variable update from the incoming check messages
    for v in range(n):
        s = llr_ch[v]
        for i in range(var_ptr[v], var_ptr[v + 1]):
            s += c2v[var_edges[i]]
        post[v] = s
        for i in range(var_ptr[v], var_ptr[v + 1]):
            e = var_edges[i]
            v2c[e] = s - c2v[e]
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        # check update, tanh rule with prefix/suffix products
        for c in range(m):
            lo = check_ptr[c]
            hi = check_ptr[c + 1]
            for e in range(lo, hi):
                x = v2c[e]
                if x > _MSG_CLIP:
                    x = _MSG_CLIP
                elif x < -_MSG_CLIP:
                    x = -_MSG_CLIP
                t[e] = np.tanh(0.5 * x)
            acc = 1.0
            for e in range(lo, hi):
                c2v[e] = acc
                acc *= t[e]
            acc = 1.0
            for e in range(hi - 1, lo - 1, -1):
                p = c2v[e] * acc
                acc *= t[e]
                if p > _TANH_CLIP:
                    p = _TANH_CLIP
                elif p < -_TANH_CLIP:
                    p = -_TANH_CLIP
                c2v[e] = 2.0 * np.arctanh(p)
        for v in range(n):
            s = llr_ch[v]
            for i in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[var_edges[i]]
            post[v] = s
            hard[v] = 1 if s < 0 else 0
            for i in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edges[i]
                v2c[e] = s - c2v[e]
        ok = True
        for c in range(m):
            par = 0
            for e in range(check_ptr[c], check_ptr[c + 1]):
                par ^= hard[check_vars[e]]
            if par:
                ok = False
                break
        if ok:
            converged = True
            break
    if it == 0:
        for v in range(n):
            hard[v] = 1 if post[v] < 0 else 0
    return hard, post, converged, it


@dataclass
class DecodeResult:
    hard: np.ndarray
    posterior: np.ndarray
    converged: bool
    iterations: int
    check_messages: np.ndarray


def bp_decode(
    code: LdpcCode,
    channel_llrs,
    max_iters: int = 50,
    check_messages: np.ndarray | None = None,
) -> DecodeResult:
    """Sum-product decoding with early stop on a zero syndrome.

    ``check_messages`` (one per edge, in ``code.check_vars`` order) warm-starts
    the decoder, e.g. across outer detection iterations; the updated messages
    are returned.  LLRs are ``log P(0)/P(1)``.
    """
    llr = np.ascontiguousarray(channel_llrs, dtype=float)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} channel LLRs")
    if not np.all(np.isfinite(llr)):
        raise ValueError("channel LLRs must be finite")
    c2v = np.zeros(code.n_edges) if check_messages is None else np.array(check_messages, dtype=float)
    var_ptr, var_edges = code.var_edges()
    hard, post, conv, it = _spa(llr, code.check_ptr, code.check_vars, var_ptr, var_edges, c2v, int(max_iters))
    return DecodeResult(hard, post, bool(conv), int(it), c2v)
