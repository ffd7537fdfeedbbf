"""EXIT-chart analysis of iterative two-user detection and LDPC decoding.

The detector is characterized by simulation on a grid of a-priori mutual
informations for both users; the decoders use the analytic Gaussian
approximation.  Fixing the user-1 a-priori level and running the
detector/decoder-2 loop to its fixed point projects the three-block system
onto a two-curve chart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .channel import InterferenceProfile, gains_from_profile, interferer_constellations, noise_variance
from .constellation import Constellation, JointConstellation
from .errors import ConvergenceError, InvalidParameterError, NotFoundError
from .infotheory import _residual, metric_noise_var
from .jfunc import j_inverse
from .ldpc.distributions import DegreeDistribution
from .ldpc.exit_curves import decoder_exit
from .mud import bit_mi, demap
from .report import csv_text

DEFAULT_GRID = np.linspace(0.0, 1.0, 11)
DEFAULT_SYMBOLS = 50_000
SUBITER_CAP = 200


@dataclass(frozen=True)
class ExitCurve:
    grid: np.ndarray
    extrinsic: np.ndarray
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        e = np.asarray(self.extrinsic, dtype=float)
        if g.shape != e.shape or np.any(np.diff(g) <= 0):
            raise InvalidParameterError("grid must be strictly increasing and match extrinsic")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "extrinsic", np.clip(e, 0.0, 1.0))

    def __call__(self, x):
        return np.interp(x, self.grid, self.extrinsic)

    @property
    def slope(self) -> float:
        """``I_E(last) - I_E(first)``."""
        return float(self.extrinsic[-1] - self.extrinsic[0])

    def is_monotone(self, slack: float = 0.01) -> bool:
        return bool(np.all(np.diff(self.extrinsic) >= -slack))

    def to_csv(self) -> str:
        return exit_csv({"curve": self}, self.context)


# ---------------------------------------------------------------------------
# detector


@dataclass(frozen=True)
class DetectorSetup:
    """What the SISO detector sees.

    ``alphabet`` is a joint (two-signal) constellation or a single one; the
    first ``bits1`` label bits belong to decoder 1 and the rest to decoder 2.
    Samples carry every interferer of ``profile`` beyond the modeled ones.
    """

    alphabet: JointConstellation | Constellation
    bits1: int
    profile: InterferenceProfile
    snr_db: float
    rx_offset_db: float = 0.0
    residual_alphabets: tuple | None = None
    name: str = ""

    @property
    def nbits(self) -> int:
        a = self.alphabet
        return a.nbits if isinstance(a, JointConstellation) else a.bits_per_symbol

    @property
    def joint(self) -> bool:
        return isinstance(self.alphabet, JointConstellation)

    def at_snr(self, snr_db: float) -> "DetectorSetup":
        return DetectorSetup(self.alphabet, self.bits1, self.profile, snr_db, self.rx_offset_db, self.residual_alphabets, self.name)


def _draws(setup: DetectorSetup, n: int, seed):
    """Common random numbers for one detector characterization."""
    rng = np.random.default_rng(seed)
    a = setup.alphabet
    labels = rng.integers(0, 1 << setup.nbits, n)
    h = a.index_of_label[labels]
    gains = gains_from_profile(setup.profile)
    alph = list(setup.residual_alphabets) if setup.residual_alphabets is not None else interferer_constellations(setup.profile)
    skip = 2 if setup.joint else 1
    if not setup.joint and gains.size > 1:
        # the strongest interferer is not modeled: it is part of the residual
        resid = _residual(rng, n, gains[1:], alph)
        extra = float(np.sum(np.abs(gains[1:]) ** 2))
    else:
        resid = _residual(rng, n, gains[skip:], alph[skip - 1:])
        extra = float(np.sum(np.abs(gains[skip:]) ** 2))
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    ga = rng.standard_normal((n, setup.nbits))
    bits = ((labels[:, None] >> np.arange(setup.nbits - 1, -1, -1)[None, :]) & 1).astype(np.int64)
    return a.points[h] + resid, z, ga, bits, extra


def _apriori(sigma: float, bits: np.ndarray, normals: np.ndarray) -> np.ndarray:
    return (sigma * sigma / 2.0) * (1.0 - 2.0 * bits) + sigma * normals


def detector_exit_table(
    setup: DetectorSetup,
    grid: Sequence[float] = DEFAULT_GRID,
    n_symbols: int = DEFAULT_SYMBOLS,
    seed=0,
    max_log: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Extrinsic MI of both bit groups on the grid of a-priori pairs.

    Returns ``(T1, T2)`` with ``T[i, j]`` measured at user-1 a-priori
    ``grid[i]`` and user-2 a-priori ``grid[j]``.  Every grid point reuses the
    same symbols, noise and a-priori normals.
    """
    grid = np.asarray(grid, dtype=float)
    x, z, ga, bits, extra = _draws(setup, n_symbols, seed)
    y = x + np.sqrt(noise_variance(setup.snr_db)) * z
    nvar = metric_noise_var(setup.snr_db, setup.rx_offset_db, extra)
    a = setup.alphabet
    B = a.bit_matrix
    b1 = setup.bits1
    sig = j_inverse(grid)
    G = grid.size
    T1 = np.zeros((G, G))
    T2 = np.zeros((G, G))
    two = setup.nbits > b1
    for i in range(G):
        for j in range(G if two else 1):
            pri = np.empty_like(ga)
            pri[:, :b1] = _apriori(sig[i], bits[:, :b1], ga[:, :b1])
            if two:
                pri[:, b1:] = _apriori(sig[j], bits[:, b1:], ga[:, b1:])
            L = demap(y, a.points, B, nvar, pri, max_log)
            T1[i, j] = bit_mi(L[:, :b1], bits[:, :b1])
            if two:
                T2[i, j] = bit_mi(L[:, b1:], bits[:, b1:])
        if not two:
            T1[i, :] = T1[i, 0]
    return np.clip(T1, 0, 1), np.clip(T2, 0, 1)


def detector_exit_curve(
    setup: DetectorSetup,
    grid: Sequence[float] = DEFAULT_GRID,
    n_symbols: int = DEFAULT_SYMBOLS,
    seed=0,
    user: int = 1,
    other_apriori: float = 0.0,
    max_log: bool = False,
) -> ExitCurve:
    """Detector curve of one user with the other user's a-priori MI held fixed."""
    grid = np.asarray(grid, dtype=float)
    x, z, ga, bits, extra = _draws(setup, n_symbols, seed)
    y = x + np.sqrt(noise_variance(setup.snr_db)) * z
    nvar = metric_noise_var(setup.snr_db, setup.rx_offset_db, extra)
    b1 = setup.bits1
    mine = slice(0, b1) if user == 1 else slice(b1, setup.nbits)
    other = slice(b1, setup.nbits) if user == 1 else slice(0, b1)
    s_other = float(j_inverse(other_apriori))
    out = []
    for s in j_inverse(grid):
        pri = np.empty_like(ga)
        pri[:, mine] = _apriori(float(s), bits[:, mine], ga[:, mine])
        pri[:, other] = _apriori(s_other, bits[:, other], ga[:, other])
        L = demap(y, setup.alphabet.points, setup.alphabet.bit_matrix, nvar, pri, max_log)
        out.append(bit_mi(L[:, mine], bits[:, mine]))
    ctx = {"detector": setup.name, "snr_db": setup.snr_db, "user": user, "other_apriori": other_apriori}
    return ExitCurve(grid, np.array(out), ctx)


@dataclass(frozen=True)
class DetectorSurface:
    """Bilinear interpolation of a detector EXIT table."""

    grid: np.ndarray
    T1: np.ndarray
    T2: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "_f1", RegularGridInterpolator((g, g), self.T1))
        object.__setattr__(self, "_f2", RegularGridInterpolator((g, g), self.T2))

    def user1(self, a1, a2):
        a1, a2 = np.broadcast_arrays(np.clip(a1, 0, 1), np.clip(a2, 0, 1))
        return self._f1(np.stack([a1.ravel(), a2.ravel()], axis=1)).reshape(a1.shape)

    def user2(self, a1, a2):
        a1, a2 = np.broadcast_arrays(np.clip(a1, 0, 1), np.clip(a2, 0, 1))
        return self._f2(np.stack([a1.ravel(), a2.ravel()], axis=1)).reshape(a1.shape)

    def swapped(self) -> "DetectorSurface":
        """Surface with the roles of the two users exchanged."""
        return DetectorSurface(self.grid, self.T2.T, self.T1.T)

    @classmethod
    def measure(cls, setup, grid=DEFAULT_GRID, n_symbols=DEFAULT_SYMBOLS, seed=0, max_log=False):
        T1, T2 = detector_exit_table(setup, grid, n_symbols, seed, max_log)
        return cls(np.asarray(grid, dtype=float), T1, T2)


# ---------------------------------------------------------------------------
# decoders and projection


def decoder_transfer(dist: DegreeDistribution | None, resolution: int = 2001) -> Callable:
    """Tabulated decoder curve (detector-side MI in, extrinsic MI out).

    ``None`` stands for a signal whose bits are all known (output 1).
    """
    if dist is None:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    xs = np.linspace(0.0, 1.0, resolution)
    ys = np.maximum.accumulate(decoder_exit(dist, xs))
    return lambda x: np.interp(x, xs, ys)


@dataclass(frozen=True)
class ProjectedChart:
    """Two-curve chart seen by decoder 1.

    ``detector[k]`` is the extrinsic MI toward decoder 1 when it supplies
    a-priori MI ``grid[k]`` and the detector/decoder-2 loop has settled;
    ``decoder[k]`` is the MI decoder 1 returns for that input.  The tunnel is
    open when ``decoder > grid`` everywhere below the end point.
    """

    grid: np.ndarray
    detector: np.ndarray
    decoder: np.ndarray
    subiterations: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.decoder - self.grid

    @property
    def min_gap(self) -> float:
        return float(self.gap.min())

    @property
    def is_open(self) -> bool:
        return self.min_gap > 0.0

    def area(self) -> float:
        trap = getattr(np, "trapezoid", None) or np.trapz
        return float(trap(self.gap, self.grid))

    def curves(self) -> tuple[ExitCurve, ExitCurve]:
        return (
            ExitCurve(self.grid, self.detector, {"curve": "combined detector"}),
            ExitCurve(self.grid, self.decoder, {"curve": "decoder 1"}),
        )


CHART_GRID = np.linspace(0.0, 0.999, 200)


def subsystem_fixed_point(surface: DetectorSurface, dec2: Callable, a1, tol: float = 1e-6, cap: int = SUBITER_CAP):
    """User-2 a-priori MI at the fixed point of the detector/decoder-2 loop.

    Iterates from zero, flooding every ``a1`` value at once; returns the
    fixed point and the number of sub-iterations used.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.zeros_like(a1)
    for it in range(1, cap + 1):
        new = dec2(surface.user2(a1, a2))
        if np.max(np.abs(new - a2)) < tol:
            return new, it
        a2 = new
    raise ConvergenceError(f"detector/decoder-2 loop did not settle in {cap} sub-iterations")


def projected_chart(
    surface: DetectorSurface,
    dec2: Callable,
    dec1: Callable,
    grid: np.ndarray = CHART_GRID,
    tol: float = 1e-6,
    cap: int = SUBITER_CAP,
) -> ProjectedChart:
    grid = np.asarray(grid, dtype=float)
    a2, it = subsystem_fixed_point(surface, dec2, grid, tol, cap)
    det = surface.user1(grid, a2)
    return ProjectedChart(grid, det, dec1(det), np.full(grid.size, it))


def sequential_projected_chart(surface, dec2, dec1, grid=CHART_GRID, tol=1e-6, cap=SUBITER_CAP) -> ProjectedChart:
    """Same projection, alternating detector and decoder 2 one grid point at a time."""
    grid = np.asarray(grid, dtype=float)
    det = np.empty_like(grid)
    its = np.empty(grid.size, dtype=int)
    for k, x in enumerate(grid):
        a2 = 0.0
        for it in range(1, cap + 1):
            e2 = float(surface.user2(x, a2))
            new = float(dec2(e2))
            if abs(new - a2) < tol:
                a2 = new
                break
            a2 = new
        else:
            raise ConvergenceError(f"sub-iteration cap reached at a-priori {x}")
        det[k] = float(surface.user1(x, a2))
        its[k] = it
    return ProjectedChart(grid, det, dec1(det), its)


def single_user_chart(curve: ExitCurve | DetectorSurface, dec1: Callable, grid=CHART_GRID) -> ProjectedChart:
    """Chart for a detector without a second decoded signal."""
    grid = np.asarray(grid, dtype=float)
    if isinstance(curve, DetectorSurface):
        det = curve.user1(grid, np.zeros_like(grid))
    else:
        det = curve(grid)
    return ProjectedChart(grid, det, dec1(det), np.zeros(grid.size, dtype=int))


def predict_threshold(
    chart_at: Callable[[float], ProjectedChart],
    lo_db: float = 0.0,
    hi_db: float = 15.0,
    tolerance_db: float = 0.05,
) -> float:
    """Smallest SNR (dB) with an open tunnel, by bisection.

    ``chart_at(snr_db)`` must be deterministic (common random numbers).
    """
    if not chart_at(hi_db).is_open:
        raise NotFoundError(f"tunnel closed at the top of the search range ({hi_db} dB)")
    if chart_at(lo_db).is_open:
        return lo_db
    lo, hi = lo_db, hi_db
    while hi - lo > tolerance_db:
        mid = 0.5 * (lo + hi)
        if chart_at(mid).is_open:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class ChartFactory:
    """Deterministic ``snr_db -> ProjectedChart`` map with cached detector tables."""

    def __init__(
        self,
        setup: DetectorSetup,
        dist1: DegreeDistribution | None,
        dist2: DegreeDistribution | None = None,
        grid=DEFAULT_GRID,
        n_symbols: int = DEFAULT_SYMBOLS,
        seed=0,
        two_user: bool | None = None,
    ):
        self.setup = setup
        self.grid = np.asarray(grid, dtype=float)
        self.n_symbols = n_symbols
        self.seed = seed
        self.two_user = setup.nbits > setup.bits1 if two_user is None else two_user
        self.dec1 = decoder_transfer(dist1)
        self.dec2 = decoder_transfer(dist2) if self.two_user else None
        self._cache: dict[float, DetectorSurface] = {}

    def surface(self, snr_db: float) -> DetectorSurface:
        key = round(float(snr_db), 9)
        if key not in self._cache:
            self._cache[key] = DetectorSurface.measure(self.setup.at_snr(snr_db), self.grid, self.n_symbols, self.seed)
        return self._cache[key]

    def chart(self, snr_db: float, dec1: Callable | None = None) -> ProjectedChart:
        d1 = self.dec1 if dec1 is None else dec1
        s = self.surface(snr_db)
        if self.two_user:
            return projected_chart(s, self.dec2, d1)
        return single_user_chart(s, d1)

    __call__ = chart


# ---------------------------------------------------------------------------
# degree-distribution search


@dataclass(frozen=True)
class DesignCandidate:
    dist: DegreeDistribution
    threshold_db: float
    area: float
    stability: float  # edge fraction of degree 2 times (dc - 1)


def three_degree_candidates(
    rate: float,
    degrees: Sequence[int],
    check_degrees: Sequence[int],
    f_low_grid: Sequence[float],
    max_deg2_fraction: float = 0.8,
) -> list[DegreeDistribution]:
    """Three-degree VNDs with uniform CND meeting the rate exactly.

    For each ``d1 < d2 < d3`` drawn from ``degrees``, each check degree and
    each lowest-degree fraction ``f1`` on the grid, the remaining fractions
    follow from normalization and edge balance.  Profiles with a negative
    fraction or too many degree-2 nodes are dropped.
    """
    out = []
    for d1, d2, d3 in itertools.combinations(sorted(set(int(d) for d in degrees)), 3):
        for dc in check_degrees:
            target = (1.0 - rate) * dc  # mean variable degree
            for f1 in f_low_grid:
                # f2 + f3 = 1 - f1 ; d2 f2 + d3 f3 = target - d1 f1
                rest = 1.0 - f1
                f3 = (target - d1 * f1 - d2 * rest) / (d3 - d2)
                f2 = rest - f3
                if min(f1, f2, f3) < -1e-12 or f3 < 1e-9 or f2 < 1e-9:
                    continue
                if d1 == 2 and f1 > max_deg2_fraction + 1e-12:
                    continue
                f2 = round(f2, 12)
                f3 = round(f3, 12)
                vnd = ((d1, round(float(f1), 12)), (d2, f2), (d3, round(1.0 - round(float(f1), 12) - f2, 12)))
                try:
                    out.append(DegreeDistribution(vnd, ((int(dc), 1.0),), rate))
                except InvalidParameterError:
                    continue
    return out


def stability_value(dist: DegreeDistribution) -> float:
    lam = dict(dist.vn_edge_fractions())
    dc = max(d for d, _ in dist.cnd)
    return float(lam.get(2, 0.0) * (dc - 1))


def optimize_degrees(
    factory: ChartFactory,
    rate: float,
    degrees: Sequence[int] = (2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 30, 50),
    check_degrees: Sequence[int] | None = None,
    f_low_grid: Sequence[float] | None = None,
    context_snr_db: float | None = None,
    snr_probe_db: Sequence[float] | None = None,
    max_deg2_fraction: float = 0.8,
    candidates: Sequence[DegreeDistribution] | None = None,
) -> tuple[DesignCandidate, list[DesignCandidate]]:
    """Search three-degree profiles for the lowest predicted threshold.

    A candidate is feasible when its tunnel is open at ``context_snr_db``.
    Feasible candidates are ranked by the threshold estimated from the
    cached detector tables at ``snr_probe_db`` (linear interpolation of the
    minimum tunnel gap), then by larger tunnel area at the context SNR.
    Returns the best candidate and the full feasible list.
    """
    if context_snr_db is None:
        context_snr_db = factory.setup.snr_db
    if check_degrees is None:
        check_degrees = (6,) if rate <= 0.5 else (12,)
    if f_low_grid is None:
        f_low_grid = np.round(np.arange(0.30, max_deg2_fraction + 1e-9, 0.05), 4)
    if snr_probe_db is None:
        snr_probe_db = np.round(np.arange(context_snr_db - 2.0, context_snr_db + 1e-9, 0.25), 6)
    pool = list(candidates) if candidates is not None else three_degree_candidates(
        rate, degrees, check_degrees, f_low_grid, max_deg2_fraction
    )
    pool = [d for d in pool if not any(dd == 2 and f > max_deg2_fraction + 1e-12 for dd, f in d.vnd)]
    feasible = []
    probes = sorted(float(s) for s in snr_probe_db)
    for dist in pool:
        dec1 = decoder_transfer(dist)
        dec2 = dec1 if factory.two_user else None
        ctx = _chart_with(factory, context_snr_db, dec1, dec2)
        if not ctx.is_open:
            continue
        gaps = [_chart_with(factory, s, dec1, dec2).min_gap for s in probes]
        thr = _gap_crossing(probes, gaps)
        feasible.append(DesignCandidate(dist, thr, ctx.area(), stability_value(dist)))
    if not feasible:
        raise NotFoundError("no candidate distribution has an open tunnel")
    best = min(feasible, key=lambda c: (c.threshold_db, -c.area))
    return best, feasible


def _chart_with(factory: ChartFactory, snr_db, dec1, dec2) -> ProjectedChart:
    s = factory.surface(snr_db)
    if factory.two_user:
        return projected_chart(s, dec2, dec1)
    return single_user_chart(s, dec1)


def _gap_crossing(snrs, gaps) -> float:
    """SNR where the minimum gap turns positive, linearly interpolated."""
    snrs = np.asarray(snrs)
    gaps = np.asarray(gaps)
    if gaps[0] > 0:
        return float(snrs[0])
    for k in range(1, len(snrs)):
        if gaps[k] > 0 >= gaps[k - 1]:
            t = -gaps[k - 1] / (gaps[k] - gaps[k - 1])
            return float(snrs[k - 1] + t * (snrs[k] - snrs[k - 1]))
    return float(snrs[-1])


# ---------------------------------------------------------------------------
# output


def exit_csv(curves: dict, meta: dict | None = None) -> str:
    """Long-format CSV ``curve,I_A,I_E`` of several curves."""
    rows = []
    for name, c in curves.items():
        for a, e in zip(c.grid, c.extrinsic):
            rows.append((name, float(a), float(e)))
    return csv_text(("curve", "I_A", "I_E"), rows, meta)
