"""Sparse parity-check structure, serialization and girth."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from ..errors import ConstructionError, InvalidParameterError


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Parity-check code stored as check-to-variable lists in CSR form.

    ``check_ptr[c]:check_ptr[c+1]`` indexes ``check_vars`` for check ``c``.
    The encoder artifact is built on first use and cached.
    """

    n: int
    check_ptr: np.ndarray
    check_vars: np.ndarray
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        ptr = np.ascontiguousarray(self.check_ptr, dtype=np.int64)
        idx = np.ascontiguousarray(self.check_vars, dtype=np.int64)
        if ptr[0] != 0 or ptr[-1] != idx.size or np.any(np.diff(ptr) < 0):
            raise InvalidParameterError("malformed check pointer array")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise InvalidParameterError("variable index out of range")
        for c in range(ptr.size - 1):
            row = idx[ptr[c]:ptr[c + 1]]
            if np.unique(row).size != row.size:
                raise ConstructionError(f"duplicate edge in check {c}")
        ptr.setflags(write=False)
        idx.setflags(write=False)
        object.__setattr__(self, "check_ptr", ptr)
        object.__setattr__(self, "check_vars", idx)

    @classmethod
    def from_check_lists(cls, n: int, checks, name: str = "") -> "LdpcCode":
        rows = [np.asarray(r, dtype=np.int64) for r in checks]
        ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([r.size for r in rows])
        idx = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        return cls(int(n), ptr, idx, name)

    @classmethod
    def from_dense(cls, H: np.ndarray, name: str = "") -> "LdpcCode":
        H = np.asarray(H) % 2
        return cls.from_check_lists(H.shape[1], [np.flatnonzero(r) for r in H], name)

    @property
    def m(self) -> int:
        return self.check_ptr.size - 1

    @property
    def n_edges(self) -> int:
        return self.check_vars.size

    @property
    def design_rate(self) -> float:
        return 1.0 - self.m / self.n

    def check_list(self, c: int) -> np.ndarray:
        return self.check_vars[self.check_ptr[c]:self.check_ptr[c + 1]]

    @property
    def check_degrees(self) -> np.ndarray:
        return np.diff(self.check_ptr)

    @property
    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.check_vars, minlength=self.n)

    def edge_checks(self) -> np.ndarray:
        """Check index of every edge, aligned with ``check_vars``."""
        return np.repeat(np.arange(self.m), self.check_degrees)

    def var_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR over variables: ``(var_ptr, edge ids)``."""
        key = "var_edges"
        if key not in self._cache:
            order = np.argsort(self.check_vars, kind="stable")
            ptr = np.zeros(self.n + 1, dtype=np.int64)
            ptr[1:] = np.cumsum(self.var_degrees)
            self._cache[key] = (ptr, order.astype(np.int64))
        return self._cache[key]

    def dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_checks(), self.check_vars] = 1
        return H

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """Parity of every check; ``bits`` may be (n,) or (frames, n)."""
        b = np.asarray(bits, dtype=np.uint8)
        vals = b[..., self.check_vars]
        return np.add.reduceat(vals, self.check_ptr[:-1], axis=-1) % 2

    def is_codeword(self, bits) -> bool:
        return not np.any(self.syndrome(bits))

    def same_graph(self, other: "LdpcCode") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.check_ptr, other.check_ptr)
            and np.array_equal(self.check_vars, other.check_vars)
        )

    # encoder module imports this one, so import it lazily
    def encoder(self):
        from .encoder import build_encoder

        if "encoder" not in self._cache:
            self._cache["encoder"] = build_encoder(self)
        return self._cache["encoder"]

    @property
    def k(self) -> int:
        """Code dimension (``n`` minus the GF(2) rank of H)."""
        return self.encoder().k

    def encode(self, message: np.ndarray) -> np.ndarray:
        return self.encoder().encode(message)


# ---------------------------------------------------------------------------
# text format: "n m" header, then one line per check with its variable indices


def dumps(code: LdpcCode) -> str:
    lines = [f"{code.n} {code.m}"]
    for c in range(code.m):
        lines.append(" ".join(str(int(v)) for v in code.check_list(c)))
    return "\n".join(lines) + "\n"


def loads(text: str, name: str = "") -> LdpcCode:
    lines = text.strip("\n").split("\n")
    try:
        n, m = (int(t) for t in lines[0].split())
        rows = [np.array([int(t) for t in ln.split()], dtype=np.int64) for ln in lines[1:1 + m]]
    except ValueError as exc:
        raise InvalidParameterError(f"malformed code file: {exc}") from None
    if len(rows) != m:
        raise InvalidParameterError(f"expected {m} check lines, found {len(rows)}")
    return LdpcCode.from_check_lists(n, rows, name)


def save(code: LdpcCode, path) -> None:
    Path(path).write_text(dumps(code))


def load(path) -> LdpcCode:
    p = Path(path)
    return loads(p.read_text(), name=p.stem)


# ---------------------------------------------------------------------------
# girth


@nb.njit(cache=True)
def _girth_kernel(n, m, check_ptr, check_vars, var_ptr, var_edges, edge_check):
    # nodes: variables 0..n-1, checks n..n+m-1
    N = n + m
    best = 1 << 30
    dist = np.full(N, -1, np.int64)
    parent = np.full(N, -1, np.int64)
    queue = np.empty(N, np.int64)
    touched = np.empty(N, np.int64)
    for root in range(n):
        nt = 0
        dist[root] = 0
        parent[root] = -1
        touched[nt] = root
        nt += 1
        head = 0
        tail = 0
        queue[tail] = root
        tail += 1
        while head < tail:
            u = queue[head]
            head += 1
            if 2 * dist[u] >= best:
                break
            if u < n:
                lo = var_ptr[u]
                hi = var_ptr[u + 1]
            else:
                lo = check_ptr[u - n]
                hi = check_ptr[u - n + 1]
            for t in range(lo, hi):
                if u < n:
                    w = n + edge_check[var_edges[t]]
                else:
                    w = check_vars[t]
                if w == parent[u]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    touched[nt] = w
                    nt += 1
                    queue[tail] = w
                    tail += 1
                else:
                    cyc = dist[u] + dist[w] + 1
                    if cyc < best:
                        best = cyc
        for i in range(nt):
            dist[touched[i]] = -1
            parent[touched[i]] = -1
    return best


def girth(code: LdpcCode) -> int | float:
    """Length of the shortest cycle of the Tanner graph (``inf`` if acyclic)."""
    var_ptr, var_edges = code.var_edges()
    g = _girth_kernel(code.n, code.m, code.check_ptr, code.check_vars, var_ptr, var_edges, code.edge_checks())
    return float("inf") if g >= (1 << 30) else int(g)
