"""Node-perspective degree distributions and their integer realization."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import ConstructionError, InvalidParameterError


@dataclass(frozen=True)
class DegreeDistribution:
    """Fractions of variable and check nodes per degree.

    ``vnd`` and ``cnd`` are tuples of ``(degree, node_fraction)`` sorted by
    degree.
    """

    vnd: tuple
    cnd: tuple
    rate: float
    name: str = ""

    def __post_init__(self):
        vnd = tuple(sorted((int(d), float(f)) for d, f in self.vnd if f > 0))
        cnd = tuple(sorted((int(d), float(f)) for d, f in self.cnd if f > 0))
        for side, pairs in (("vnd", vnd), ("cnd", cnd)):
            if not pairs:
                raise InvalidParameterError(f"{side} is empty")
            if abs(sum(f for _, f in pairs) - 1.0) > 1e-9:
                raise InvalidParameterError(f"{side} fractions must sum to 1")
            if any(d < 1 for d, _ in pairs) or len({d for d, _ in pairs}) != len(pairs):
                raise InvalidParameterError(f"{side} degrees must be distinct positive integers")
        if not 0.0 < self.rate < 1.0:
            raise InvalidParameterError("rate must lie in (0, 1)")
        object.__setattr__(self, "vnd", vnd)
        object.__setattr__(self, "cnd", cnd)

    @property
    def mean_vn_degree(self) -> float:
        return sum(d * f for d, f in self.vnd)

    @property
    def mean_cn_degree(self) -> float:
        return sum(d * f for d, f in self.cnd)

    @property
    def edge_imbalance(self) -> float:
        """Per-variable-node edge mismatch ``mean_vn - (1-rate)*mean_cn``."""
        return self.mean_vn_degree - (1.0 - self.rate) * self.mean_cn_degree

    def vn_edge_fractions(self) -> list[tuple[int, float]]:
        tot = self.mean_vn_degree
        return [(d, d * f / tot) for d, f in self.vnd]

    def cn_edge_fractions(self) -> list[tuple[int, float]]:
        tot = self.mean_cn_degree
        return [(d, d * f / tot) for d, f in self.cnd]


def _largest_remainder(total: int, fractions) -> np.ndarray:
    raw = np.asarray(fractions, dtype=float) * total
    base = np.floor(raw + 1e-9).astype(np.int64)
    short = total - int(base.sum())
    rem = raw - base
    # stable: larger remainder first, then lower degree
    order = np.lexsort((np.arange(rem.size), -np.round(rem, 12)))
    for k in order[: max(short, 0)]:
        base[k] += 1
    return base


def check_count(n: int, rate: float) -> int:
    return int(round(n * (1.0 - rate)))


def node_counts(dist: DegreeDistribution, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer variable and check degree sequences for length ``n``.

    Node counts come from the largest-remainder method.  The edge surplus or
    deficit is then absorbed by moving nodes between the lowest variable
    degree and the next one when those differ by one (each move changes the
    edge count by one); whatever cannot be absorbed that way is spread as
    +-1 adjustments on the checks, highest degree first for removals and
    lowest first for additions.  Returns ``(var_degrees, check_degrees)``
    sorted nondecreasingly.
    """
    m = check_count(n, dist.rate)
    if m < 1 or m >= n:
        raise InvalidParameterError("block length too short for the rate")
    vdeg = np.array([d for d, _ in dist.vnd])
    vcnt = _largest_remainder(n, [f for _, f in dist.vnd])
    cdeg = np.array([d for d, _ in dist.cnd])
    ccnt = _largest_remainder(m, [f for _, f in dist.cnd])
    excess = int(vcnt @ vdeg - ccnt @ cdeg)
    if vdeg.size > 1 and vdeg[1] == vdeg[0] + 1:
        if excess > 0:  # too many variable edges: demote nodes to the lowest degree
            k = min(excess, int(vcnt[1]))
            vcnt[1] -= k
            vcnt[0] += k
            excess -= k
        elif excess < 0:
            k = min(-excess, int(vcnt[0]))
            vcnt[0] -= k
            vcnt[1] += k
            excess += k
    var_degrees = np.repeat(vdeg, vcnt)
    check_degrees = np.repeat(cdeg, ccnt)
    if abs(excess) > m:
        raise ConstructionError(f"edge imbalance of {excess} cannot be absorbed by {m} checks")
    if excess > 0:
        check_degrees[:excess] += 1
    elif excess < 0:
        check_degrees[check_degrees.size + excess:] -= 1
    if np.any(check_degrees < 1):
        raise ConstructionError("rounding produced an empty check")
    return np.sort(var_degrees), np.sort(check_degrees)


# ---------------------------------------------------------------------------
# named profiles

_TABLE = {
    (1, Fraction(1, 2)): ({2: 0.60, 3: 0.314, 10: 0.086}, 6),
    (2, Fraction(1, 2)): ({2: 0.60, 3: 0.365, 20: 0.035}, 6),
    (1, Fraction(3, 4)): ({2: 0.80, 3: 0.183, 50: 0.017}, 12),
    (2, Fraction(3, 4)): ({2: 0.70, 3: 0.285, 50: 0.015}, 12),
}

# DVB-S2 normal-frame profiles (node fractions)
_DVB = {
    Fraction(1, 2): ({8: 0.2, 3: 0.3, 2: 0.5}, 7),
    Fraction(3, 4): ({12: 1.0 / 12.0, 3: 2.0 / 3.0, 2: 0.25}, 14),
}


def _rate_key(rate) -> Fraction:
    return Fraction(rate).limit_denominator(16)


def table2_distribution(strategy: int, rate) -> DegreeDistribution:
    """Designed three-degree profile for a strategy (1 or 2) and rate (1/2 or 3/4)."""
    key = (int(strategy), _rate_key(rate))
    if key not in _TABLE:
        raise InvalidParameterError(f"no designed profile for strategy {strategy}, rate {rate}")
    vnd, dc = _TABLE[key]
    return DegreeDistribution(tuple(vnd.items()), ((dc, 1.0),), float(key[1]), name=f"designed-s{key[0]}-r{key[1]}")


def dvb_distribution(rate) -> DegreeDistribution:
    """Degree profile of the DVB-S2 normal-frame code of the given rate."""
    key = _rate_key(rate)
    if key not in _DVB:
        raise InvalidParameterError(f"no DVB-S2 profile for rate {rate}")
    vnd, dc = _DVB[key]
    return DegreeDistribution(tuple(vnd.items()), ((dc, 1.0),), float(key), name=f"dvbs2-r{key}")


def regular_distribution(dv: int, dc: int) -> DegreeDistribution:
    return DegreeDistribution(((dv, 1.0),), ((dc, 1.0),), 1.0 - dv / dc, name=f"regular-{dv}-{dc}")


def named_distribution(name: str) -> DegreeDistribution:
    """Lookup by string: ``s1-1/2``, ``s2-3/4``, ``dvb-1/2``, ``regular-3-6``..."""
    key = name.lower().strip()
    if key.startswith("dvb-"):
        return dvb_distribution(Fraction(key[4:]))
    if key.startswith("regular-"):
        dv, dc = key[8:].split("-")
        return regular_distribution(int(dv), int(dc))
    if key[:1] == "s" and "-" in key:
        s, r = key[1:].split("-", 1)
        return table2_distribution(int(s), Fraction(r))
    raise InvalidParameterError(f"unknown distribution {name!r}")
