"""Achievable rates of the reference user under mismatched detection.

The receiver metric always models at most two signals plus Gaussian noise,
while the samples are generated with every interferer present.  All Monte
Carlo estimators draw their randomness from a seed, so evaluating the same
seed at several SNRs or phases uses common random numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .channel import (
    InterferenceProfile,
    alamouti_combine,
    gains_from_profile,
    interferer_constellations,
    noise_variance,
)
from .constellation import Constellation, make_constellation
from .errors import EstimationError, InvalidParameterError, NotFoundError
from .report import csv_text

LN2 = np.log(2.0)
DEFAULT_SAMPLES = 200_000
_CHUNK = 20_000

TARGETS = ("I1", "I2", "I_J", "I_x1", "I_x2")


@dataclass(frozen=True)
class MiEstimate:
    value: float
    std_error: float
    n_samples: int


@dataclass(frozen=True)
class RateResult:
    """Rate quantities at one SNR, in bits per channel use.

    ``I_S`` is the rate with the interferer treated as a known-statistics
    nuisance, ``I_A`` the rate when the interferer is decoded.  Quantities a
    detector does not produce are NaN.
    """

    snr_db: float
    I1: float
    I2: float
    I_J: float
    I_S: float
    I_A: float
    R1: float
    se: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ModCodAtom:
    """Interferer rate ``rate`` (bits/symbol) used with probability ``probability``."""

    rate: float
    probability: float
    modulation: str | None = None


#: documented stand-in for the interferer ModCod histogram (not measured data)
PLACEHOLDER_MODCODS = (
    ModCodAtom(1.5, 0.1, "qpsk"),
    ModCodAtom(2.0, 0.2, "8psk"),
    ModCodAtom(2.25, 0.4, "8psk"),
    ModCodAtom(2.5, 0.2, "8psk"),
    ModCodAtom(3.0, 0.1, "16apsk"),
)


def G(x):
    """log2(1 + x)."""
    return np.log2(1.0 + np.asarray(x, dtype=float))


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def metric_noise_var(snr_db: float, rx_offset_db: float = 0.0, extra: float = 0.0) -> float:
    """Noise variance assumed by the receiver.

    ``rx_offset_db`` shifts the SNR the receiver believes in (negative values
    make it assume more noise); ``extra`` adds unmodeled interference power.
    """
    return noise_variance(snr_db + rx_offset_db) + extra


# --------------------------------------------------------------------------
# sample generation


def _residual(rng, n, gains, alphabets) -> np.ndarray:
    r = np.zeros(n, dtype=complex)
    for g, c in zip(gains, alphabets):
        idx = rng.integers(0, c.M, n)
        if g != 0:
            r += g * c.points[idx]
    return r


def draw_two_user(
    c1: Constellation,
    c2: Constellation | None,
    profile: InterferenceProfile,
    snr_db: float,
    n: int,
    rng: np.random.Generator,
    residual_alphabets: Sequence[Constellation] | None = None,
):
    """Symbols and observations for the full K-signal channel.

    Returns ``(y, i1, i2)``; ``i2`` is None when ``c2`` is None (the strongest
    interferer then takes its alphabet from ``residual_alphabets``).  The draw
    order is fixed so equal seeds give common random numbers across SNRs.
    """
    gains = gains_from_profile(profile)
    alph = list(residual_alphabets) if residual_alphabets is not None else interferer_constellations(profile)
    i1 = rng.integers(0, c1.M, n)
    y = c1.points[i1].astype(complex)
    i2 = None
    if profile.K > 1:
        second = c2 if c2 is not None else alph[0]
        i2 = rng.integers(0, second.M, n)
        y = y + gains[1] * second.points[i2]
        y = y + _residual(rng, n, gains[2:], alph[1:])
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(noise_variance(snr_db) / 2.0)
    return y + z, i1, (i2 if c2 is not None else None)


# --------------------------------------------------------------------------
# per-sample information densities


def _two_user_terms(y, i1, i2, p1, p2, gamma2, nvar) -> dict[str, np.ndarray]:
    M1, M2 = p1.size, p2.size
    d = -np.abs(y[:, None, None] - p1[None, :, None] - gamma2 * p2[None, None, :]) ** 2 / nvar
    n = np.arange(y.size)
    lse = logsumexp(d, axis=(1, 2))
    lse_a = logsumexp(d, axis=1)[n, i2]  # marginal over x1 given the true x2
    lse_b = logsumexp(d, axis=2)[n, i1]  # marginal over x2 given the true x1
    dt = d[n, i1, i2]
    return {
        "I_J": np.log2(M1 * M2) + (dt - lse) / LN2,
        "I1": np.log2(M1) + (dt - lse_a) / LN2,
        "I2": np.log2(M2) + (dt - lse_b) / LN2,
        "I_x1": np.log2(M1) + (lse_b - lse) / LN2,
        "I_x2": np.log2(M2) + (lse_a - lse) / LN2,
    }


def _single_user_terms(y, i1, p1, nvar) -> np.ndarray:
    d = -np.abs(y[:, None] - p1[None, :]) ** 2 / nvar
    n = np.arange(y.size)
    return np.log2(p1.size) + (d[n, i1] - logsumexp(d, axis=1)) / LN2


def _estimate(terms: np.ndarray) -> MiEstimate:
    n = terms.size
    v = float(np.mean(terms))
    se = float(np.std(terms, ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    if not np.isfinite(v) or np.isnan(se):
        raise EstimationError("mutual information estimate is not finite")
    return MiEstimate(v, se, n)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def mutual_informations(
    c1: Constellation,
    c2: Constellation,
    profile: InterferenceProfile,
    snr_db: float,
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
    residual_alphabets: Sequence[Constellation] | None = None,
) -> dict[str, MiEstimate]:
    """All two-user mismatched MIs at one SNR.

    Keys: ``I1`` = I(x1;y|x2), ``I2`` = I(x2;y|x1), ``I_J`` = I(x1,x2;y),
    ``I_x1`` = I(x1;y), ``I_x2`` = I(x2;y).  The metric models x1 and the
    strongest interferer with alphabet ``c2``; weaker interferers add their
    power to the metric noise variance.
    """
    if n_samples < 2:
        raise InvalidParameterError("need at least two samples")
    rng = _rng(seed)
    gains = gains_from_profile(profile)
    g2 = gains[1] if gains.size > 1 else 0j
    prof = profile if profile.K > 1 else InterferenceProfile((float("inf"),))
    nvar = metric_noise_var(snr_db, rx_offset_db, float(np.sum(np.abs(gains[2:]) ** 2)))
    acc = {k: [] for k in TARGETS}
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        y, i1, i2 = draw_two_user(c1, c2, prof, snr_db, m, rng, residual_alphabets)
        for k, v in _two_user_terms(y, i1, i2, c1.points, c2.points, g2, nvar).items():
            acc[k].append(v)
        done += m
    return {k: _estimate(np.concatenate(v)) for k, v in acc.items()}


def mi_mismatched(target: str, *args, **kwargs) -> MiEstimate:
    """Single entry of :func:`mutual_informations`."""
    if target not in TARGETS:
        raise InvalidParameterError(f"target must be one of {TARGETS}")
    return mutual_informations(*args, **kwargs)[target]


def sud_mi(
    c1: Constellation,
    profile: InterferenceProfile,
    snr_db: float,
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
    second: Constellation | None = None,
    residual_alphabets: Sequence[Constellation] | None = None,
) -> MiEstimate:
    """I(x1;y) for a receiver that treats every interferer as Gaussian noise."""
    rng = _rng(seed)
    gains = gains_from_profile(profile)
    nvar = metric_noise_var(snr_db, rx_offset_db, float(np.sum(np.abs(gains[1:]) ** 2)))
    out = []
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        if profile.K > 1:
            y, i1, _ = draw_two_user(c1, second, profile, snr_db, m, rng, residual_alphabets)
        else:
            y, i1, _ = draw_two_user(c1, None, profile, snr_db, m, rng)
        out.append(_single_user_terms(y, i1, c1.points, nvar))
        done += m
    return _estimate(np.concatenate(out))


def single_user_mi(c: Constellation, snr_db: float, n_samples: int = DEFAULT_SAMPLES, seed=0) -> MiEstimate:
    """Interference-free constellation-constrained MI."""
    return sud_mi(c, InterferenceProfile(), snr_db, n_samples, seed)


# --------------------------------------------------------------------------
# rate formulas


def rate_IA(R2: float, I1: float, I2: float, I_J: float) -> float:
    """Rate of user 1 when the fixed-rate interferer is decoded."""
    if R2 < 0:
        raise InvalidParameterError("R2 must be non-negative")
    if R2 >= I2:
        return 0.0
    if R2 < I_J - I1:
        return float(I1)
    return float(I_J - R2)


def rate_theorem1(I_S: float, I_A: float) -> float:
    """Overall user-1 rate: the better of ignoring or decoding the interferer."""
    return float(max(I_S, I_A))


def gaussian_rates(snr_linear: float, gamma2_mag: float, R2: float, snr_db: float | None = None) -> RateResult:
    """Closed-form rates for Gaussian inputs."""
    if snr_linear <= 0:
        raise InvalidParameterError("snr_linear must be positive")
    s, g2 = float(snr_linear), float(gamma2_mag) ** 2
    I1 = float(G(s))
    I2 = float(G(s * g2))
    IJ = float(G(s * (1.0 + g2)))
    IS = float(G(s / (1.0 + s * g2)))
    IA = rate_IA(R2, I1, I2, IJ)
    return RateResult(
        snr_db=float(lin_to_db(s)) if snr_db is None else snr_db,
        I1=I1, I2=I2, I_J=IJ, I_S=IS, I_A=IA, R1=rate_theorem1(IS, IA),
    )


def gaussian_branch_edges(gamma2_mag: float, R2: float) -> tuple[float, float]:
    """SNRs (linear) where the decoded-interferer rate changes branch.

    Returns ``(snr_c, snr_top)``: below ``snr_c`` the interferer cannot be
    decoded, above ``snr_top`` user 1 reaches its single-user rate.  Solves
    G(s g^2) = R2 and G(s g^2/(1+s)) = R2.
    """
    g2 = float(gamma2_mag) ** 2
    t = 2.0 ** R2 - 1.0
    if g2 == 0:
        return 0.0, 0.0
    snr_c = t / g2
    snr_top = t / (g2 - t) if g2 > t else float("inf")
    return snr_c, snr_top


def as_profile(gamma2) -> InterferenceProfile:
    """Two-signal profile from a complex gain (or a profile passed through)."""
    if isinstance(gamma2, InterferenceProfile):
        return gamma2
    g = complex(gamma2)
    lam = float("inf") if g == 0 else -20.0 * np.log10(abs(g))
    return InterferenceProfile((lam,), (float(np.angle(g)),))


def cutoff_snr(
    R2: float,
    gamma2,
    c1: Constellation | None = None,
    c2: Constellation | None = None,
    tolerance_db: float = 0.01,
    lo_db: float = -30.0,
    hi_db: float = 40.0,
    n_samples: int = 50_000,
    seed=0,
) -> float:
    """SNR (dB) at which I(x2;y|x1) reaches ``R2``.

    With ``c1``/``c2`` None the Gaussian closed form is used, otherwise a
    common-random-number Monte Carlo estimate.  Returns ``lo_db`` when the
    interferer is decodable over the whole range.
    """
    if c2 is not None and R2 >= np.log2(c2.M):
        raise InvalidParameterError("R2 must be below log2(M2)")

    if c1 is None or c2 is None:
        mag = abs(complex(gamma2)) if not isinstance(gamma2, InterferenceProfile) else abs(gamma2.gamma2)

        def I2(snr_db):
            return float(G(db_to_lin(snr_db) * mag**2))
    else:
        prof = as_profile(gamma2)

        def I2(snr_db):
            return mutual_informations(c1, c2, prof, snr_db, n_samples, seed)["I2"].value

    if I2(lo_db) >= R2:
        return lo_db
    if I2(hi_db) < R2:
        raise NotFoundError(f"R2={R2} not reachable below {hi_db} dB")
    lo, hi = lo_db, hi_db
    while hi - lo > tolerance_db:
        mid = 0.5 * (lo + hi)
        if I2(mid) >= R2:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# strategy curves


def _combine_se(weights, ses) -> float:
    return float(np.sqrt(np.sum((np.asarray(weights) * np.asarray(ses)) ** 2)))


def strategy1_rate_curve(
    profile: InterferenceProfile,
    c1: Constellation,
    atoms: Sequence[ModCodAtom],
    snr_grid: Sequence[float],
    detector: str = "mud2",
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
    default_modulation: str = "qpsk",
) -> list[RateResult]:
    """User-1 rate versus SNR with the interferer rate drawn from ``atoms``.

    For ``mud2`` every field is the probability-weighted mean over atoms and
    ``R1`` is the mean of the per-atom ``max(I_S, I_A)``.  For ``sud`` only
    ``I_S`` and ``R1`` are defined.
    """
    probs = np.array([a.probability for a in atoms], dtype=float)
    if len(atoms) == 0 or abs(probs.sum() - 1.0) > 1e-9 or np.any(probs < 0):
        raise InvalidParameterError("ModCod probabilities must be non-negative and sum to 1")
    detector = detector.lower()
    if detector not in ("mud2", "sud"):
        raise InvalidParameterError("detector must be 'mud2' or 'sud'")
    nan = float("nan")
    out = []
    for snr in snr_grid:
        if detector == "sud":
            # the interferer alphabet only matters through its samples
            vals, ses = [], []
            for a in atoms:
                c2 = make_constellation(a.modulation or default_modulation)
                est = sud_mi(c1, profile, snr, n_samples, seed, rx_offset_db, second=c2)
                vals.append(est.value)
                ses.append(est.std_error)
            v = float(np.dot(probs, vals))
            out.append(RateResult(float(snr), nan, nan, nan, v, 0.0, v, {"I_S": _combine_se(probs, ses), "R1": _combine_se(probs, ses)}))
            continue
        rows = []
        for a in atoms:
            c2 = make_constellation(a.modulation or default_modulation)
            mi = mutual_informations(c1, c2, profile, snr, n_samples, seed, rx_offset_db)
            IA = rate_IA(a.rate, mi["I1"].value, mi["I2"].value, mi["I_J"].value)
            rows.append((mi, IA, rate_theorem1(mi["I_x1"].value, IA)))
        avg = lambda key: float(np.dot(probs, [r[0][key].value for r in rows]))
        se = {
            name: _combine_se(probs, [r[0][key].std_error for r in rows])
            for name, key in (("I1", "I1"), ("I2", "I2"), ("I_J", "I_J"), ("I_S", "I_x1"))
        }
        se["R1"] = float(max(se["I_S"], se["I_J"], se["I1"]))
        out.append(
            RateResult(
                snr_db=float(snr),
                I1=avg("I1"),
                I2=avg("I2"),
                I_J=avg("I_J"),
                I_S=avg("I_x1"),
                I_A=float(np.dot(probs, [r[1] for r in rows])),
                R1=float(np.dot(probs, [r[2] for r in rows])),
                se=se,
            )
        )
    return out


def strategy2_rate(alpha: float, I_J: float) -> float:
    """User-1 rate when it owns both signals a fraction ``alpha`` of the time."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError("alpha must lie in [0, 1]")
    return float(alpha * I_J)


def strategy2_rate_curve(
    profile: InterferenceProfile,
    c1: Constellation,
    c2: Constellation,
    snr_grid: Sequence[float],
    alpha: float = 0.5,
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
) -> list[tuple[float, float, float]]:
    """``(snr_db, rate, std_error)`` rows for time sharing of both signals."""
    out = []
    for snr in snr_grid:
        est = mutual_informations(c1, c2, profile, snr, n_samples, seed, rx_offset_db)["I_J"]
        out.append((float(snr), strategy2_rate(alpha, est.value), alpha * est.std_error))
    return out


def alamouti_mi(
    c1: Constellation,
    profile: InterferenceProfile,
    snr_db: float,
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
    c2: Constellation | None = None,
    residual_alphabets: Sequence[Constellation] | None = None,
) -> MiEstimate:
    """MI of user 1 after Alamouti combining (per combined symbol, before halving).

    Both slots of a pair are generated with independent weaker-interferer
    symbols and noise; the metric treats the residual power as noise.
    """
    rng = _rng(seed)
    c2 = c1 if c2 is None else c2
    gains = gains_from_profile(profile)
    g2 = complex(gains[1]) if gains.size > 1 else 0j
    alph = list(residual_alphabets) if residual_alphabets is not None else interferer_constellations(profile)
    resid = float(np.sum(np.abs(gains[2:]) ** 2))
    nvar = metric_noise_var(snr_db, rx_offset_db, resid)
    scale = np.sqrt(1.0 + abs(g2) ** 2)
    N = noise_variance(snr_db)
    out = []
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        i1 = rng.integers(0, c1.M, m)
        i2 = rng.integers(0, c2.M, m)
        r1 = _residual(rng, m, gains[2:], alph[1:])
        r2 = _residual(rng, m, gains[2:], alph[1:])
        w = (rng.standard_normal((2, m)) + 1j * rng.standard_normal((2, m))) * np.sqrt(N / 2.0)
        x1, x2 = c1.points[i1], c2.points[i2]
        yA1 = x1 + g2 * x2 + r1 + w[0]
        yA2 = -np.conj(x2) + g2 * np.conj(x1) + r2 + w[1]
        z1, _ = alamouti_combine(yA1, yA2, g2)
        out.append(_single_user_terms(z1, i1, scale * c1.points, nvar))
        done += m
    return _estimate(np.concatenate(out))


def strategy3_rate(
    snr_db: float,
    gamma2,
    constellation: Constellation,
    n_samples: int = DEFAULT_SAMPLES,
    seed=0,
    rx_offset_db: float = 0.0,
) -> MiEstimate:
    """Half the Alamouti-combined MI; ``gamma2`` may be a gain or a profile."""
    est = alamouti_mi(constellation, as_profile(gamma2), snr_db, n_samples, seed, rx_offset_db)
    return MiEstimate(0.5 * est.value, 0.5 * est.std_error, est.n_samples)


def strategy3_rate_curve(profile, constellation, snr_grid, n_samples=DEFAULT_SAMPLES, seed=0, rx_offset_db=0.0):
    out = []
    for snr in snr_grid:
        est = strategy3_rate(snr, profile, constellation, n_samples, seed, rx_offset_db)
        out.append((float(snr), est.value, est.std_error))
    return out


def optimize_phase(
    profile: InterferenceProfile,
    c1: Constellation,
    c2: Constellation,
    snr_db: float,
    objective: str = "I_J",
    grid_steps: int = 32,
    R2: float | None = None,
    n_samples: int = 50_000,
    seed=0,
) -> float:
    """Phase of the strongest interferer maximizing the chosen rate.

    The grid is ``2*pi*k/grid_steps``; every point reuses the same random
    numbers, and the first maximizer wins ties.
    """
    if grid_steps < 8:
        raise InvalidParameterError("grid_steps must be at least 8")
    if objective not in ("I_J", "R1"):
        raise InvalidParameterError("objective must be 'I_J' or 'R1'")
    if objective == "R1" and R2 is None:
        raise InvalidParameterError("objective 'R1' needs R2")
    phases = 2.0 * np.pi * np.arange(grid_steps) / grid_steps
    scores = []
    for ph in phases:
        mi = mutual_informations(c1, c2, profile.with_phase(ph), snr_db, n_samples, seed)
        if objective == "I_J":
            scores.append(mi["I_J"].value)
        else:
            IA = rate_IA(R2, mi["I1"].value, mi["I2"].value, mi["I_J"].value)
            scores.append(rate_theorem1(mi["I_x1"].value, IA))
    scores = np.asarray(scores)
    # treat values equal to round-off as ties so flat objectives return the first point
    best = np.flatnonzero(scores >= scores.max() - 1e-12)[0]
    return float(phases[best])


# --------------------------------------------------------------------------
# output

RATE_COLUMNS = ("snr_db", "I1", "I2", "I_J", "I_S", "I_A", "R1", "se_I1", "se_I2", "se_I_J", "se_I_S", "se_R1")


def rate_rows(results: Sequence[RateResult]) -> list[tuple]:
    nan = float("nan")
    return [
        (r.snr_db, r.I1, r.I2, r.I_J, r.I_S, r.I_A, r.R1,
         r.se.get("I1", nan), r.se.get("I2", nan), r.se.get("I_J", nan), r.se.get("I_S", nan), r.se.get("R1", nan))
        for r in results
    ]


def rates_csv(results: Sequence[RateResult], meta=None) -> str:
    return csv_text(RATE_COLUMNS, rate_rows(results), meta)
