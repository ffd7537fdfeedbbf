"""Progressive edge growth on a prescribed degree sequence."""

from __future__ import annotations

import numba as nb
import numpy as np
import scipy.sparse as sp

from ..errors import ConstructionError, InvalidParameterError
from .code import LdpcCode
from .distributions import DegreeDistribution, node_counts


@nb.njit(cache=True)
def _peg_kernel(var_deg, check_cap, rank):
    n = var_deg.size
    m = check_cap.size
    dv_max = var_deg.max()
    dc_max = check_cap.max()
    v_adj = np.full((n, dv_max), -1, np.int64)
    v_cnt = np.zeros(n, np.int64)
    c_adj = np.full((m, dc_max), -1, np.int64)
    c_cnt = np.zeros(m, np.int64)
    c_seen = np.zeros(m, np.int64)  # BFS stamp
    v_seen = np.zeros(n, np.int64)
    c_depth = np.zeros(m, np.int64)
    frontier = np.empty(m, np.int64)
    nxt = np.empty(m, np.int64)
    stamp = 0
    for v in range(n):
        for k in range(var_deg[v]):
            stamp += 1
            # checks adjacent to v are never candidates
            for t in range(v_cnt[v]):
                c_seen[v_adj[v, t]] = stamp
            n_cand = 0
            for c in range(m):
                if c_cnt[c] < check_cap[c] and c_seen[c] != stamp:
                    n_cand += 1
            if n_cand == 0:
                return v_adj, v_cnt, c_adj, c_cnt, v
            reached = 0
            depth = 0
            if v_cnt[v] > 0:
                v_seen[v] = stamp
                nf = 0
                for t in range(v_cnt[v]):
                    c = v_adj[v, t]
                    c_depth[c] = 0
                    frontier[nf] = c
                    nf += 1
                while nf > 0 and reached < n_cand:
                    depth += 1
                    nn = 0
                    for i in range(nf):
                        c = frontier[i]
                        for s in range(c_cnt[c]):
                            u = c_adj[c, s]
                            if v_seen[u] == stamp:
                                continue
                            v_seen[u] = stamp
                            for t in range(v_cnt[u]):
                                c2 = v_adj[u, t]
                                if c_seen[c2] != stamp:
                                    c_seen[c2] = stamp
                                    c_depth[c2] = depth
                                    nxt[nn] = c2
                                    nn += 1
                                    if c_cnt[c2] < check_cap[c2]:
                                        reached += 1
                    for i in range(nn):
                        frontier[i] = nxt[i]
                    nf = nn
            # pick: unreached candidates beat reached ones, then deeper, then
            # lower current degree, then lower rank
            best = -1
            best_key0 = -1
            best_deg = 0
            best_rank = 0
            for c in range(m):
                if c_cnt[c] >= check_cap[c]:
                    continue
                if c_seen[c] == stamp:
                    # reached (or adjacent: depth 0 of own neighbourhood excluded below)
                    key0 = c_depth[c]
                    adjacent = False
                    for t in range(v_cnt[v]):
                        if v_adj[v, t] == c:
                            adjacent = True
                    if adjacent:
                        continue
                else:
                    key0 = 1 << 40
                if (
                    best < 0
                    or key0 > best_key0
                    or (key0 == best_key0 and (c_cnt[c] < best_deg or (c_cnt[c] == best_deg and rank[c] < best_rank)))
                ):
                    best = c
                    best_key0 = key0
                    best_deg = c_cnt[c]
                    best_rank = rank[c]
            v_adj[v, v_cnt[v]] = best
            v_cnt[v] += 1
            c_adj[best, c_cnt[best]] = v
            c_cnt[best] += 1
    return v_adj, v_cnt, c_adj, c_cnt, -1


def four_cycle_pairs(n: int, checks) -> np.ndarray:
    """Variable pairs sharing two or more checks, as an (k, 2) array."""
    rows = np.repeat(np.arange(len(checks)), [len(c) for c in checks])
    cols = np.fromiter((v for c in checks for v in c), dtype=np.int64, count=rows.size)
    H = sp.csr_matrix((np.ones(rows.size, dtype=np.int32), (rows, cols)), shape=(len(checks), n))
    G = (H.T @ H).tocoo()
    sel = (G.data > 1) & (G.row < G.col)
    return np.stack([G.row[sel], G.col[sel]], axis=1)


def _closes_square(v, c, var_nb, chk_nb) -> bool:
    # would edge (v, c) put v and another member of c on two common checks?
    others = chk_nb[c] - {v}
    for c2 in var_nb[v]:
        if c2 != c and not others.isdisjoint(chk_nb[c2]):
            return True
    return False


def remove_four_cycles(n: int, checks, rng, max_rounds: int = 50, tries: int = 200):
    """Break 4-cycles by swapping edge endpoints.

    Swapping (v, c), (u, d) into (v, d), (u, c) keeps every node degree.  A
    swap is kept only if neither new edge closes a 4-cycle, so the count
    drops with every accepted swap.  Returns the new check lists and the
    number of 4-cycles left.
    """
    chk_nb = [set(int(v) for v in c) for c in checks]
    var_nb = [set() for _ in range(n)]
    for c, vs in enumerate(chk_nb):
        for v in vs:
            var_nb[v].add(c)
    edges = [(v, c) for c, vs in enumerate(chk_nb) for v in sorted(vs)]
    where = {e: i for i, e in enumerate(edges)}
    pairs = four_cycle_pairs(n, checks)
    for _ in range(max_rounds):
        if pairs.size == 0:
            break
        for a, b in pairs:
            common = sorted(var_nb[a] & var_nb[b])
            if len(common) < 2:
                continue
            v = int(a if rng.random() < 0.5 else b)
            c = common[int(rng.integers(len(common)))]
            for _t in range(tries):
                u, d = edges[int(rng.integers(len(edges)))]
                if u == v or d == c or d in var_nb[v] or c in var_nb[u]:
                    continue
                chk_nb[c].discard(v); chk_nb[d].discard(u)
                var_nb[v].discard(c); var_nb[u].discard(d)
                if _closes_square(v, d, var_nb, chk_nb) or _closes_square(u, c, var_nb, chk_nb):
                    chk_nb[c].add(v); chk_nb[d].add(u)
                    var_nb[v].add(c); var_nb[u].add(d)
                    continue
                chk_nb[d].add(v); chk_nb[c].add(u)
                var_nb[v].add(d); var_nb[u].add(c)
                i, j = where.pop((v, c)), where.pop((u, d))
                edges[i], edges[j] = (v, d), (u, c)
                where[(v, d)], where[(u, c)] = i, j
                break
        pairs = four_cycle_pairs(n, [sorted(s) for s in chk_nb])
    out = [np.array(sorted(s), dtype=np.int64) for s in chk_nb]
    return out, int(pairs.shape[0])


def peg_construct(n: int, dist: DegreeDistribution, rng=None, seed: int | None = None) -> LdpcCode:
    """Build a Tanner graph by progressive edge growth.

    Variables are processed in nondecreasing degree order and check
    capacities follow :func:`node_counts`.  Each new edge goes to the
    admissible check farthest from the variable in the current graph
    (unreachable counts as infinitely far); ties go to the lowest current
    check degree, then to the lowest position in a random ordering of the
    checks drawn from ``rng``.  Any 4-cycles the greedy pass leaves are then
    broken by degree-preserving edge swaps where possible.  The result is
    deterministic given the seed.
    """
    if n < 4:
        raise InvalidParameterError("n too small")
    if rng is None:
        rng = np.random.default_rng(seed)
    var_deg, check_deg = node_counts(dist, n)
    m = check_deg.size
    if var_deg.max() > m:
        raise ConstructionError("a variable degree exceeds the number of checks")
    # shuffle which check gets which capacity, then rank checks randomly
    check_cap = rng.permutation(check_deg).astype(np.int64)
    rank = rng.permutation(m).astype(np.int64)
    v_adj, v_cnt, c_adj, c_cnt, fail = _peg_kernel(var_deg.astype(np.int64), check_cap, rank)
    if fail >= 0:
        raise ConstructionError(f"no admissible check left for variable {fail}")
    checks = [np.sort(c_adj[c, : c_cnt[c]]) for c in range(m)]
    checks, _left = remove_four_cycles(n, checks, rng)
    return LdpcCode.from_check_lists(n, checks, name=f"peg-{dist.name or 'custom'}-{n}")
