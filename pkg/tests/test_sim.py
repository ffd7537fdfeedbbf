import numpy as np
import pytest

from mbsat.channel import InterferenceProfile, preset_profile
from mbsat.errors import InvalidParameterError
from mbsat.ldpc.distributions import regular_distribution
from mbsat.ldpc.peg import peg_construct
from mbsat.sim import (
    BerPoint,
    FrameConfig,
    ber_crossing,
    ber_csv,
    clopper_pearson,
    frame_rng,
    run_frame,
    simulate_point,
    sweep_ber,
)

CODE_A = peg_construct(200, regular_distribution(3, 6), seed=1)
CODE_B = peg_construct(200, regular_distribution(3, 6), seed=2)
CASE1 = preset_profile("case1", np.pi / 4)


def cfg(**kw):
    base = dict(strategy=2, profile=CASE1, code1=CODE_A, code2=CODE_B, mapping="joint", max_global_iterations=10)
    base.update(kw)
    return FrameConfig(**base)


def _overlap(a: BerPoint, b: BerPoint) -> bool:
    lo1, hi1 = a.interval
    lo2, hi2 = b.interval
    return lo1 <= hi2 and lo2 <= hi1


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            cfg(strategy=4)
        with pytest.raises(InvalidParameterError):
            cfg(code2=None)
        with pytest.raises(InvalidParameterError):
            cfg(strategy=1, mapping="joint")
        with pytest.raises(InvalidParameterError):
            cfg(mapping="remap")
        with pytest.raises(InvalidParameterError):
            cfg(detector="ml")

    def test_layout_mixed_modulation(self):
        c = cfg(mapping="classical", modulation2="8psk", code2=peg_construct(300, regular_distribution(3, 6), seed=0))
        S, ncw = c.layout()
        assert S == 100 and ncw == [1, 1]
        c = cfg(mapping="classical", modulation2="8psk")
        with pytest.raises(InvalidParameterError):
            c.layout()

    def test_interleavers_are_permutations(self):
        for p in cfg().interleavers():
            assert np.array_equal(np.sort(p), np.arange(p.size))


class TestFrames:
    @pytest.mark.parametrize(
        "kw",
        [
            {},
            {"mapping": "classical"},
            {"strategy": 1, "mapping": "classical"},
            {"strategy": 1, "mapping": "remap"},
            {"strategy": 3, "mapping": "classical", "code2": None},
            {"strategy": 1, "detector": "sud", "mapping": "classical", "profile": InterferenceProfile((np.inf,))},
        ],
    )
    def test_noiseless_one_iteration(self, kw):
        c = cfg(max_global_iterations=1, **kw)
        r = run_frame(c, np.inf, frame_rng(0, np.inf, 0))
        assert r.bit_errors == 0 and r.global_iterations == 1

    def test_bit_accounting(self):
        c = cfg()
        p = simulate_point(c, 2.0, min_errors=10**9, max_frames=8)
        assert p.frames == 8
        assert p.bits == 8 * c.info_bits_per_frame() == 8 * (CODE_A.k + CODE_B.k)
        s1 = cfg(strategy=1, mapping="classical")
        assert s1.info_bits_per_frame() == CODE_A.k

    def test_deterministic(self):
        a = simulate_point(cfg(), 2.0, min_errors=50, max_frames=12)
        b = simulate_point(cfg(), 2.0, min_errors=50, max_frames=12)
        assert a == b

    def test_jobs_do_not_change_result(self):
        a = simulate_point(cfg(), 2.0, min_errors=30, max_frames=16, jobs=1)
        b = simulate_point(cfg(), 2.0, min_errors=30, max_frames=16, jobs=2)
        assert a == b

    def test_strategy1_stops_on_user1(self):
        c = cfg(strategy=1, mapping="classical", max_global_iterations=20)
        p = simulate_point(c, 30.0, min_errors=1, max_frames=4)
        assert p.bit_errors == 0 and p.mean_global_iterations == 1.0

    def test_vanishing_interferer_matches_single_user(self):
        gone = cfg(strategy=1, detector="sud", mapping="classical", profile=InterferenceProfile((np.inf,)))
        alone = cfg(strategy=1, detector="sud", mapping="classical", profile=InterferenceProfile())
        a = simulate_point(gone, 1.0, min_errors=10**9, max_frames=40)
        b = simulate_point(alone, 1.0, min_errors=10**9, max_frames=40)
        assert a.bit_errors > 0 and _overlap(a, b)

    def test_alamouti_gain_identity(self):
        # unit interferer: the combined symbol carries twice the energy
        s3 = cfg(strategy=3, mapping="classical", code2=None, profile=InterferenceProfile((0.0,)))
        su = cfg(strategy=1, detector="sud", mapping="classical", profile=InterferenceProfile())
        a = simulate_point(s3, 0.0 - 10 * np.log10(2), min_errors=10**9, max_frames=40)
        b = simulate_point(su, 0.0, min_errors=10**9, max_frames=40)
        assert a.bit_errors > 0 and _overlap(a, b)


class TestSweep:
    def test_stop_rule(self):
        pts = sweep_ber(cfg(), [20.0, 21.0, 22.0, 23.0], min_errors=1, max_bits=1000, max_frames=2)
        assert [p.snr_db for p in pts] == [20.0, 21.0]

    def test_requires_ascending(self):
        with pytest.raises(InvalidParameterError):
            sweep_ber(cfg(), [3.0, 2.0])

    def test_csv(self):
        p = BerPoint(1.0, 3, 1000, 2, 1, 4.0)
        text = ber_csv([p], {"seed": 0})
        assert text.splitlines()[1].startswith("snr_db,bit_errors,bits")


class TestCrossing:
    def test_log_linear(self):
        pts = [BerPoint(1.0, 100, 100_000, 1, 1, 1), BerPoint(2.0, 1, 100_000, 1, 1, 1)]
        assert ber_crossing(pts, 1e-4) == pytest.approx(1.5)

    def test_zero_errors_half_count(self):
        pts = [BerPoint(1.0, 100, 100_000, 1, 1, 1), BerPoint(2.0, 0, 50_000, 1, 0, 1)]
        # second point counts as 1e-5
        assert ber_crossing(pts, 1e-4) == pytest.approx(1.5)

    def test_never_crosses(self):
        pts = [BerPoint(1.0, 100, 1000, 1, 1, 1), BerPoint(2.0, 90, 1000, 1, 1, 1)]
        assert np.isnan(ber_crossing(pts, 1e-4))


def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0.0 and hi == pytest.approx(1 - 0.025 ** (1 / 100))
    lo, hi = clopper_pearson(50, 100)
    assert lo == pytest.approx(0.398321, abs=1e-5) and hi == pytest.approx(0.601679, abs=1e-5)


def test_frame_rng_keys():
    a = frame_rng(1, 2.0, 3).integers(0, 2**32)
    assert a == frame_rng(1, 2.0, 3).integers(0, 2**32)
    assert a != frame_rng(1, 2.001, 3).integers(0, 2**32)
    frame_rng(1, np.inf, 0)
