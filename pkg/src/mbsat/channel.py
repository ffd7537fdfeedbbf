"""Symbol-level co-channel interference model and Alamouti processing.

The reference signal has unit gain; interferer ``i`` has gain
``10**(-lambda_i/20) * exp(1j*phi_i)``.  Transmit power is fixed to 1 so the
SNR knob only moves the thermal noise variance ``N = 10**(-snr_db/10)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constellation import Constellation, make_constellation
from .errors import InvalidParameterError, InvalidProfileError

#: power ratios (dB) of interferers 2..6 for the 2-colour reuse positions and the beam centre
PRESET_LAMBDAS_DB = {
    "case1": (0.0, 25.0, 25.0, 27.0, 30.0),
    "case2": (2.0, 26.0, 26.0, 27.0, 30.0),
    "case3": (4.0, 27.0, 26.0, 27.0, 30.0),
    "case4": (27.0, 27.0, 26.0, 27.0, 30.0),
}

#: modulation of each interferer, keyed by its signal number
INTERFERER_MODULATION = {3: "8psk", 4: "8psk", 5: "16apsk", 6: "8psk"}


def noise_variance(snr_db: float) -> float:
    """Thermal noise variance for unit transmit power."""
    return float(10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0))


@dataclass(frozen=True)
class InterferenceProfile:
    """Power ratios and phases of the K-1 interferers.

    Interferers are stored strongest first.  The constructor sorts them by
    ``lambdas_db`` with a stable sort (ties keep their input order) and keeps
    the original signal numbers in ``signal_ids`` so modulation assignments
    follow the signals.  ``inf`` removes an interferer.
    """

    lambdas_db: tuple = ()
    phases: tuple = ()
    signal_ids: tuple = ()
    name: str = ""

    def __post_init__(self):
        lam = np.asarray(self.lambdas_db, dtype=float).ravel()
        ph = np.zeros(lam.size) if len(self.phases) == 0 else np.asarray(self.phases, dtype=float).ravel()
        ids = np.arange(2, lam.size + 2) if len(self.signal_ids) == 0 else np.asarray(self.signal_ids, dtype=int)
        if ph.size != lam.size or ids.size != lam.size:
            raise InvalidParameterError("lambdas, phases and signal ids must have equal length")
        if np.any(np.isnan(lam)) or np.any(~np.isfinite(ph)):
            raise InvalidParameterError("profile contains NaN or infinite phases")
        if np.any(lam < 0):
            raise InvalidProfileError("an interferer stronger than the reference signal violates the gain ordering")
        order = np.argsort(lam, kind="stable")
        object.__setattr__(self, "lambdas_db", tuple(float(v) for v in lam[order]))
        object.__setattr__(self, "phases", tuple(float(v) for v in ph[order]))
        object.__setattr__(self, "signal_ids", tuple(int(v) for v in ids[order]))

    @property
    def K(self) -> int:
        return len(self.lambdas_db) + 1

    @property
    def gamma2(self) -> complex:
        """Gain of the strongest interferer (0 when there is none)."""
        return complex(gains_from_profile(self)[1]) if self.K > 1 else 0j

    @property
    def residual_power(self) -> float:
        """Total power of interferers beyond the strongest one."""
        g = gains_from_profile(self)
        return float(np.sum(np.abs(g[2:]) ** 2))

    def with_phase(self, phase: float) -> "InterferenceProfile":
        """Copy with the strongest interferer rotated to ``phase``."""
        ph = list(self.phases)
        if ph:
            ph[0] = float(phase)
        return InterferenceProfile(self.lambdas_db, tuple(ph), self.signal_ids, self.name)

    def truncated(self, keep: int) -> "InterferenceProfile":
        """Copy keeping only the ``keep`` strongest interferers (others set to inf)."""
        lam = list(self.lambdas_db)
        for k in range(keep, len(lam)):
            lam[k] = float("inf")
        return InterferenceProfile(tuple(lam), self.phases, self.signal_ids, self.name)


def preset_profile(name: str, phase: float = 0.0) -> InterferenceProfile:
    """Named interference profile; ``phase`` applies to the strongest interferer."""
    key = name.lower()
    if key not in PRESET_LAMBDAS_DB:
        raise InvalidParameterError(f"unknown preset {name!r}; known: {sorted(PRESET_LAMBDAS_DB)}")
    prof = InterferenceProfile(PRESET_LAMBDAS_DB[key], name=key)
    return prof.with_phase(phase)


def gains_from_profile(profile: InterferenceProfile) -> np.ndarray:
    """Complex gains ``(1, gamma_2, ..., gamma_K)``."""
    lam = np.asarray(profile.lambdas_db, dtype=float)
    mag = np.where(np.isinf(lam), 0.0, 10.0 ** (-np.where(np.isinf(lam), 0.0, lam) / 20.0))
    g = np.concatenate([[1.0 + 0j], mag * np.exp(1j * np.asarray(profile.phases, dtype=float))])
    if np.any(np.diff(np.abs(g)) > 1e-12):
        raise InvalidProfileError("gain magnitudes must be non-increasing")
    return g


def interferer_constellations(profile: InterferenceProfile, modulations: dict | None = None) -> list[Constellation]:
    """Alphabets of interferers 2..K in profile order (default 8PSK)."""
    table = INTERFERER_MODULATION if modulations is None else modulations
    return [make_constellation(table.get(sid, "8psk")) for sid in profile.signal_ids]


@dataclass(frozen=True)
class ChannelSample:
    """Received samples together with the transmitted symbol indices."""

    y: np.ndarray
    transmitted: np.ndarray = field(repr=False)


def complex_noise(rng: np.random.Generator, var: float, size) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``var``."""
    s = np.sqrt(var / 2.0)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


def superpose(symbols: np.ndarray, constellations: Sequence[Constellation], gains: np.ndarray) -> np.ndarray:
    """Noiseless sum of gain-weighted symbols; ``symbols`` has shape (K, n)."""
    symbols = np.atleast_2d(symbols)
    out = np.zeros(symbols.shape[1], dtype=complex)
    for k, (c, g) in enumerate(zip(constellations, gains)):
        if g != 0:
            out += g * c.points[symbols[k]]
    return out


def transmit(
    symbols,
    constellations: Sequence[Constellation],
    profile: InterferenceProfile,
    snr_db: float,
    rng: np.random.Generator,
) -> ChannelSample:
    """Pass K symbol streams through the interference channel.

    ``symbols`` is an integer array of shape (K,) or (K, n).  Use
    ``snr_db=np.inf`` for a noiseless channel.
    """
    sym = np.asarray(symbols, dtype=np.int64)
    single = sym.ndim == 1
    if single:
        sym = sym.reshape(-1, 1)
    gains = gains_from_profile(profile)
    if sym.shape[0] != gains.size or len(constellations) != gains.size:
        raise InvalidParameterError("need one symbol stream and one constellation per signal")
    for k, c in enumerate(constellations):
        if sym[k].min() < 0 or sym[k].max() >= c.M:
            raise InvalidParameterError(f"symbol index out of range for signal {k + 1}")
    y = superpose(sym, constellations, gains)
    N = 0.0 if np.isinf(snr_db) and snr_db > 0 else noise_variance(snr_db)
    if N > 0:
        y = y + complex_noise(rng, N, y.shape)
    if single:
        return ChannelSample(y=y[0], transmitted=sym[:, 0])
    return ChannelSample(y=y, transmitted=sym)


def alamouti_transmit_pair(x1, x2, gamma2: complex, noise=(0.0, 0.0)):
    """Two received samples of an Alamouti-precoded symbol pair.

    Works elementwise on arrays.  ``noise`` holds the two additive noise terms.
    """
    x1 = np.asarray(x1, dtype=complex)
    x2 = np.asarray(x2, dtype=complex)
    yA1 = x1 + gamma2 * x2 + noise[0]
    yA2 = -np.conj(x2) + gamma2 * np.conj(x1) + noise[1]
    return yA1, yA2


def alamouti_combine(yA1, yA2, gamma2: complex):
    """Variance-preserving Alamouti combiner.

    Returns ``(sqrt(1+|g|^2) x1 + w1, sqrt(1+|g|^2) x2 + w2)`` with ``w1, w2``
    distributed like the input noise.
    """
    yA1 = np.asarray(yA1, dtype=complex)
    yA2 = np.asarray(yA2, dtype=complex)
    scale = np.sqrt(1.0 + abs(gamma2) ** 2)
    z1 = (yA1 + gamma2 * np.conj(yA2)) / scale
    z2 = (np.conj(gamma2) * yA1 - np.conj(yA2)) / scale
    return z1, z2


def alamouti_gain_db(gamma2: complex) -> float:
    """SNR gain of the combined observation."""
    return float(10.0 * np.log10(1.0 + abs(gamma2) ** 2))
