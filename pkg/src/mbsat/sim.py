"""Coded BER simulation with iterative two-user detection and decoding."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta

from .channel import (
    InterferenceProfile,
    alamouti_combine,
    gains_from_profile,
    interferer_constellations,
    noise_variance,
)
from .constellation import (
    Constellation,
    JointConstellation,
    joint_constellation,
    joint_gray_mapping,
    make_constellation,
    strategy1_remap,
)
from .errors import InvalidParameterError
from .infotheory import _residual
from .ldpc.code import LdpcCode
from .ldpc.decoder import bp_decode
from .mud import LLR_CLAMP, demap
from .report import csv_text

#: smallest metric noise variance, used for noiseless runs
_MIN_METRIC_VAR = 1e-9


@dataclass(frozen=True, eq=False)
class FrameConfig:
    """Everything that defines one simulated link.

    ``strategy`` is 1 (interferer carries its own data, only user-1 bits are
    counted), 2 (both signals carry user-1 data) or 3 (Alamouti pairs).
    ``detector`` is ``"mud2"`` or ``"sud"`` (strategy 1 only).  ``mapping``
    selects the joint labeling: ``"classical"``, ``"joint"`` (strategy 2) or
    ``"remap"`` (strategy 1).
    """

    strategy: int
    profile: InterferenceProfile
    code1: LdpcCode
    code2: LdpcCode | None = None
    modulation1: str = "qpsk"
    modulation2: str = "qpsk"
    mapping: str = "classical"
    detector: str = "mud2"
    rx_offset_db: float = 0.0
    max_global_iterations: int = 50
    bp_iterations: int = 20
    max_log: bool = False
    seed: int = 0
    residual_modulations: dict | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.strategy not in (1, 2, 3):
            raise InvalidParameterError("strategy must be 1, 2 or 3")
        if self.max_global_iterations < 1 or self.bp_iterations < 1:
            raise InvalidParameterError("iteration caps must be at least 1")
        if self.detector not in ("mud2", "sud"):
            raise InvalidParameterError("detector must be 'mud2' or 'sud'")
        if self.strategy == 2 and self.code2 is None:
            raise InvalidParameterError("strategy 2 needs a code for signal 2")
        if self.strategy == 1 and self.detector == "mud2" and self.profile.K > 1 and self.code2 is None:
            raise InvalidParameterError("strategy 1 with the joint detector needs the interferer code")
        if self.mapping not in ("classical", "joint", "remap"):
            raise InvalidParameterError("unknown mapping")
        if self.mapping == "joint" and self.strategy != 2:
            raise InvalidParameterError("joint mapping applies to strategy 2")
        if self.mapping == "remap" and self.strategy != 1:
            raise InvalidParameterError("user-1 remapping applies to strategy 1")

    # -- derived objects ------------------------------------------------------

    @property
    def c1(self) -> Constellation:
        return make_constellation(self.modulation1)

    @property
    def c2(self) -> Constellation:
        return make_constellation(self.modulation2)

    @property
    def two_signal(self) -> bool:
        return self.strategy in (1, 2) and self.detector == "mud2" and self.profile.K > 1

    @property
    def gamma2(self) -> complex:
        g = gains_from_profile(self.profile)
        return complex(g[1]) if g.size > 1 else 0j

    def joint(self) -> JointConstellation:
        if "joint" not in self._cache:
            c1, c2, g = self.c1, self.c2, self.gamma2
            if self.mapping == "joint":
                if self.modulation1 != self.modulation2:
                    raise InvalidParameterError("joint mapping needs equal modulations")
                j = joint_gray_mapping(c1.M).with_gain(g, c1, c2)
            elif self.mapping == "remap":
                j = strategy1_remap(c1, c2, g)
            else:
                j = joint_constellation(c1, c2, g)
            self._cache["joint"] = j
        return self._cache["joint"]

    def residual_alphabets(self) -> list[Constellation]:
        return interferer_constellations(self.profile, self.residual_modulations)

    def codes(self) -> list[LdpcCode]:
        return [self.code1] + ([self.code2] if self.two_signal or self.strategy == 2 else [])

    def layout(self) -> tuple[int, list[int]]:
        """Symbols per frame and codewords per signal."""
        if "layout" not in self._cache:
            bps = [self.c1.bits_per_symbol, self.c2.bits_per_symbol]
            syms = []
            for code, b in zip(self.codes(), bps):
                if code.n % b:
                    raise InvalidParameterError(f"code length {code.n} not a multiple of {b} bits per symbol")
                syms.append(code.n // b)
            S = math.lcm(*syms)
            self._cache["layout"] = (S, [S // s for s in syms])
        return self._cache["layout"]

    def interleavers(self) -> list[np.ndarray]:
        """Fixed uniform random interleaver per signal (seeded by ``seed``)."""
        if "pi" not in self._cache:
            S, ncw = self.layout()
            out = []
            for s, (code, k) in enumerate(zip(self.codes(), ncw)):
                rng = np.random.default_rng([self.seed, 1000 + s])
                out.append(rng.permutation(code.n * k))
            self._cache["pi"] = out
        return self._cache["pi"]

    def info_bits_per_frame(self) -> int:
        S, ncw = self.layout()
        counted = self.codes()[: 2 if self.strategy == 2 else 1]
        return sum(c.k * k for c, k in zip(counted, ncw))

    def describe(self) -> dict:
        """Plain description used for fingerprints and CSV headers."""
        return {
            "strategy": self.strategy,
            "lambdas_db": list(self.profile.lambdas_db),
            "phases": list(self.profile.phases),
            "code1": [self.code1.name, self.code1.n, self.code1.m],
            "code2": None if self.code2 is None else [self.code2.name, self.code2.n, self.code2.m],
            "modulation1": self.modulation1,
            "modulation2": self.modulation2,
            "mapping": self.mapping,
            "detector": self.detector,
            "rx_offset_db": self.rx_offset_db,
            "max_global_iterations": self.max_global_iterations,
            "bp_iterations": self.bp_iterations,
            "max_log": self.max_log,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FrameResult:
    bit_errors: int
    bits: int
    frame_error: bool
    global_iterations: int


def frame_rng(seed: int, snr_db: float, frame_idx: int) -> np.random.Generator:
    """Generator for one frame; independent of how frames are scheduled."""
    key = 2**31 if not np.isfinite(snr_db) else int(round(snr_db * 1000)) % 2**31
    return np.random.default_rng([seed, key, frame_idx])


def _encode_stream(cfg: FrameConfig, s: int, ncw: int, rng) -> tuple[np.ndarray, np.ndarray]:
    code = cfg.codes()[s]
    enc = code.encoder()
    msgs = rng.integers(0, 2, (ncw, enc.k), dtype=np.uint8)
    cws = np.stack([enc.encode(m) for m in msgs])
    return msgs, cws


def _metric_var(cfg: FrameConfig, snr_db: float, extra: float) -> float:
    N = 0.0 if snr_db == np.inf else noise_variance(snr_db + cfg.rx_offset_db)
    return max(N + extra, _MIN_METRIC_VAR)


def _noise(rng, snr_db, size):
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return z * (0.0 if snr_db == np.inf else np.sqrt(noise_variance(snr_db) / 2.0))


def _labels(bits: np.ndarray) -> np.ndarray:
    m = bits.shape[1]
    return (bits.astype(np.int64) << np.arange(m - 1, -1, -1)).sum(axis=1)


def _decode_signal(code, llr_stream, pi, ncw, iters, states):
    """Deinterleave, decode every codeword, return (hard, extrinsic stream, converged)."""
    n = code.n
    deint = np.empty_like(llr_stream)
    deint[pi] = llr_stream
    hard = np.empty((ncw, n), dtype=np.uint8)
    ext = np.empty(ncw * n)
    conv = True
    for w in range(ncw):
        ch = deint[w * n:(w + 1) * n]
        res = bp_decode(code, ch, iters, states[w])
        states[w] = res.check_messages
        hard[w] = res.hard
        ext[w * n:(w + 1) * n] = res.posterior - ch
        conv &= res.converged
    return hard, np.clip(ext[pi], -LLR_CLAMP, LLR_CLAMP), conv


def run_frame(cfg: FrameConfig, snr_db: float, rng: np.random.Generator) -> FrameResult:
    """Simulate one frame and count user-1 information bit errors."""
    S, ncw = cfg.layout()
    pis = cfg.interleavers()
    codes = cfg.codes()
    gains = gains_from_profile(cfg.profile)
    c1, c2 = cfg.c1, cfg.c2
    nsig = len(codes)
    msgs, streams = [], []
    for s in range(nsig):
        m, cw = _encode_stream(cfg, s, ncw[s], rng)
        msgs.append(m)
        streams.append(cw.reshape(-1)[pis[s]])
    alph = cfg.residual_alphabets()

    if cfg.strategy == 3:
        return _run_alamouti(cfg, snr_db, rng, msgs, streams, gains, alph)

    b1 = c1.bits_per_symbol
    bits1 = streams[0].reshape(S, b1)
    if nsig == 2:
        b2 = c2.bits_per_symbol
        bits2 = streams[1].reshape(S, b2)
        joint = cfg.joint()
        h = joint.index_of_label[(_labels(bits1) << b2) | _labels(bits2)]
        x = c1.points[joint.index1[h]] + gains[1] * c2.points[joint.index2[h]]
        resid = _residual(rng, S, gains[2:], alph[1:])
        extra = float(np.sum(np.abs(gains[2:]) ** 2))
        points, B = joint.points, joint.bit_matrix
        cols = [slice(0, b1), slice(b1, b1 + b2)]
    else:
        i1 = c1.index_of_label[_labels(bits1)]
        x = c1.points[i1]
        if gains.size > 1:
            # the unmodeled strongest interferer transmits random symbols
            c2i = c2 if cfg.strategy == 1 else alph[0]
            i2 = rng.integers(0, c2i.M, S)
            x = x + gains[1] * c2i.points[i2]
        resid = _residual(rng, S, gains[2:], alph[1:])
        extra = float(np.sum(np.abs(gains[1:]) ** 2))
        points, B = c1.points, c1.bit_matrix
        cols = [slice(0, b1)]
    y = x + resid + _noise(rng, snr_db, S)
    nvar = _metric_var(cfg, snr_db, extra)

    nb = B.shape[1]
    priors = np.zeros((S, nb))
    states = [[None] * ncw[s] for s in range(nsig)]
    if nsig == 2:
        global_cap, bp_cap = cfg.max_global_iterations, cfg.bp_iterations
    else:
        global_cap, bp_cap = 1, cfg.max_global_iterations * cfg.bp_iterations
    hards = [None] * nsig
    it = 0
    for it in range(1, global_cap + 1):
        L = demap(y, points, B, nvar, priors, cfg.max_log)
        conv = []
        for s in range(nsig):
            hard, ext, ok = _decode_signal(codes[s], L[:, cols[s]].reshape(-1), pis[s], ncw[s], bp_cap, states[s])
            hards[s] = hard
            conv.append(ok)
            priors[:, cols[s]] = ext.reshape(S, -1)
        done = conv[0] if cfg.strategy == 1 else all(conv)
        if done:
            break
    return _count(cfg, codes, msgs, hards, it)


def _count(cfg, codes, msgs, hards, it) -> FrameResult:
    counted = 2 if cfg.strategy == 2 else 1
    errors, bits = 0, 0
    for s in range(counted):
        info = codes[s].encoder().info_pos
        errors += int(np.sum(hards[s][:, info] != msgs[s]))
        bits += msgs[s].size
    return FrameResult(errors, bits, errors > 0, it)


def _run_alamouti(cfg, snr_db, rng, msgs, streams, gains, alph) -> FrameResult:
    S, ncw = cfg.layout()
    c1 = cfg.c1
    b1 = c1.bits_per_symbol
    bits1 = streams[0].reshape(S, b1)
    x1 = c1.points[c1.index_of_label[_labels(bits1)]]
    g2 = complex(gains[1]) if gains.size > 1 else 0j
    # the partner signal carries independent random symbols of the same alphabet
    x2 = c1.points[rng.integers(0, c1.M, S)]
    r1 = _residual(rng, S, gains[2:], alph[1:])
    r2 = _residual(rng, S, gains[2:], alph[1:])
    yA1 = x1 + g2 * x2 + r1 + _noise(rng, snr_db, S)
    yA2 = -np.conj(x2) + g2 * np.conj(x1) + r2 + _noise(rng, snr_db, S)
    z1, _ = alamouti_combine(yA1, yA2, g2)
    extra = float(np.sum(np.abs(gains[2:]) ** 2))
    nvar = _metric_var(cfg, snr_db, extra)
    scale = np.sqrt(1.0 + abs(g2) ** 2)
    L = demap(z1, scale * c1.points, c1.bit_matrix, nvar, None, cfg.max_log)
    states = [None] * ncw[0]
    hard, _, _ = _decode_signal(
        cfg.code1, L.reshape(-1), cfg.interleavers()[0], ncw[0], cfg.max_global_iterations * cfg.bp_iterations, states
    )
    return _count(cfg, [cfg.code1], msgs, [hard], 1)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bit_errors: int
    bits: int
    frames: int
    frame_errors: int
    mean_global_iterations: float

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        return clopper_pearson(self.bit_errors, self.bits)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def _frame_job(args):
    cfg, snr_db, idx = args
    return run_frame(cfg, snr_db, frame_rng(cfg.seed, snr_db, idx))


def simulate_point(
    cfg: FrameConfig,
    snr_db: float,
    min_errors: int = 100,
    max_bits: int = 2_000_000,
    max_frames: int | None = None,
    block: int = 4,
    jobs: int = 1,
    pool: ProcessPoolExecutor | None = None,
) -> BerPoint:
    """Simulate frames in fixed blocks until enough errors or the bit budget.

    Blocks are the unit of both stopping decisions and parallel work, so the
    outcome does not depend on ``jobs``.
    """
    errs = bits = frames = ferr = iters = 0
    idx = 0
    own_pool = None
    if jobs > 1 and pool is None:
        own_pool = pool = ProcessPoolExecutor(max_workers=jobs)
    try:
        while errs < min_errors and bits < max_bits and (max_frames is None or frames < max_frames):
            batch = [(cfg, snr_db, idx + t) for t in range(block)]
            res = list(pool.map(_frame_job, batch)) if pool is not None else [_frame_job(b) for b in batch]
            idx += block
            for r in res:
                errs += r.bit_errors
                bits += r.bits
                frames += 1
                ferr += int(r.frame_error)
                iters += r.global_iterations
    finally:
        if own_pool is not None:
            own_pool.shutdown()
    return BerPoint(float(snr_db), errs, bits, frames, ferr, iters / max(frames, 1))


def sweep_ber(
    cfg: FrameConfig,
    snrs,
    min_errors: int = 100,
    max_bits: int = 2_000_000,
    target_ber: float = 1e-4,
    block: int = 4,
    jobs: int = 1,
    max_frames: int | None = None,
) -> list[BerPoint]:
    """BER versus SNR; stops after two consecutive points below ``target_ber``."""
    snrs = list(snrs)
    if any(b < a for a, b in zip(snrs, snrs[1:])):
        raise InvalidParameterError("SNR list must be ascending")
    out = []
    below = 0
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for s in snrs:
            p = simulate_point(cfg, s, min_errors, max_bits, max_frames, block, jobs, pool)
            out.append(p)
            below = below + 1 if p.ber < target_ber else 0
            if below >= 2:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def ber_crossing(points, target: float = 1e-4) -> float:
    """SNR where the BER curve crosses ``target`` (log-linear interpolation).

    Points without errors count as ``0.5 / bits``.  Returns NaN when the
    curve never crosses.
    """
    pts = sorted(points, key=lambda p: p.snr_db)
    ber = [p.ber if p.bit_errors > 0 else 0.5 / p.bits for p in pts]
    lt = np.log10(target)
    for a, b, ba, bb in zip(pts, pts[1:], ber, ber[1:]):
        if ba >= target > bb:
            la, lb = np.log10(ba), np.log10(bb)
            t = (la - lt) / (la - lb)
            return float(a.snr_db + t * (b.snr_db - a.snr_db))
    if pts and ber[0] < target:
        return float(pts[0].snr_db)
    return float("nan")


BER_COLUMNS = ("snr_db", "bit_errors", "bits", "frames", "frame_errors", "ber", "ci_low", "ci_high", "mean_global_iterations")


def ber_csv(points, meta=None) -> str:
    rows = [
        (p.snr_db, p.bit_errors, p.bits, p.frames, p.frame_errors, p.ber, *p.interval, p.mean_global_iterations)
        for p in points
    ]
    return csv_text(BER_COLUMNS, rows, meta)
