import numpy as np
import pytest

from mbsat.errors import ConstructionError, InvalidParameterError
from mbsat.ldpc.code import LdpcCode, dumps, girth, load, loads, save
from mbsat.ldpc.decoder import bp_decode
from mbsat.ldpc.distributions import (
    DegreeDistribution,
    check_count,
    dvb_distribution,
    named_distribution,
    node_counts,
    regular_distribution,
    table2_distribution,
)
from mbsat.ldpc.exit_curves import bpsk_threshold_db, cnd_exit, decoder_exit, vnd_exit
from mbsat.ldpc.peg import four_cycle_pairs, peg_construct, remove_four_cycles

from .oracles import gf2_rank, has_four_cycle, tanner_girth

TABLE = {
    (1, 0.5): ({2: 0.60, 3: 0.314, 10: 0.086}, 6),
    (2, 0.5): ({2: 0.60, 3: 0.365, 20: 0.035}, 6),
    (1, 0.75): ({2: 0.80, 3: 0.183, 50: 0.017}, 12),
    (2, 0.75): ({2: 0.70, 3: 0.285, 50: 0.015}, 12),
}


class TestDistributions:
    @pytest.mark.parametrize("key", sorted(TABLE))
    def test_designed_rows(self, key):
        d = table2_distribution(*key)
        vnd, dc = TABLE[key]
        assert dict(d.vnd) == pytest.approx(vnd)
        assert d.cnd == ((dc, 1.0),)
        assert d.rate == key[1]

    def test_names(self):
        assert named_distribution("s2-1/2") == table2_distribution(2, 0.5)
        assert named_distribution("dvb-3/4") == dvb_distribution(0.75)
        assert named_distribution("regular-3-6").rate == 0.5

    def test_bad_fractions(self):
        with pytest.raises(InvalidParameterError):
            DegreeDistribution(((2, 0.5),), ((6, 1.0),), 0.5)
        with pytest.raises(InvalidParameterError):
            table2_distribution(3, 0.5)

    @pytest.mark.parametrize("key", sorted(TABLE))
    @pytest.mark.parametrize("n", [1000, 16200])
    def test_node_counts_balance_edges(self, key, n):
        d = table2_distribution(*key)
        v, c = node_counts(d, n)
        assert v.size == n and c.size == check_count(n, d.rate)
        assert v.sum() == c.sum()
        # node moves are bounded by the initial edge surplus: the ensemble
        # imbalance plus one unit of rounding per degree on each side
        slack = abs(d.edge_imbalance) * n + sum(deg for deg, _ in d.vnd + d.cnd) + 1
        for deg, f in d.vnd:
            assert abs(np.sum(v == deg) - f * n) <= slack

    def test_regular_exact(self):
        v, c = node_counts(regular_distribution(3, 6), 120)
        assert np.all(v == 3) and np.all(c == 6) and c.size == 60


class TestPeg:
    def test_small_regular(self):
        code = peg_construct(16, regular_distribution(2, 4), seed=0)
        assert code.m == 8
        assert np.all(code.var_degrees == 2) and np.all(code.check_degrees == 4)
        assert girth(code) == tanner_girth(16, [code.check_list(c) for c in range(code.m)])
        assert girth(code) >= 6

    def test_deterministic(self):
        d = table2_distribution(2, 0.5)
        a = peg_construct(500, d, seed=7)
        b = peg_construct(500, d, seed=7)
        assert a.same_graph(b)
        assert not a.same_graph(peg_construct(500, d, seed=8))

    @pytest.mark.parametrize("key", [(1, 0.5), (2, 0.5)])
    def test_degrees_and_girth(self, key):
        d = table2_distribution(*key)
        code = peg_construct(1000, d, seed=1)
        v, c = node_counts(d, 1000)
        np.testing.assert_array_equal(np.sort(code.var_degrees), v)
        np.testing.assert_array_equal(np.sort(code.check_degrees), c)
        checks = [code.check_list(i) for i in range(code.m)]
        assert not has_four_cycle(1000, checks)
        assert girth(code) == tanner_girth(1000, checks) >= 6

    def test_swap_pass_preserves_degrees(self):
        rng = np.random.default_rng(0)
        n, m = 60, 30
        checks = [np.sort(rng.choice(n, 6, replace=False)) for _ in range(m)]
        before = four_cycle_pairs(n, checks).shape[0]
        out, left = remove_four_cycles(n, checks, rng)
        assert left <= before
        assert [len(c) for c in out] == [6] * m
        vd0 = np.bincount(np.concatenate(checks), minlength=n)
        vd1 = np.bincount(np.concatenate(out), minlength=n)
        np.testing.assert_array_equal(vd0, vd1)

    def test_degree_exceeds_checks(self):
        with pytest.raises((ConstructionError, InvalidParameterError)):
            peg_construct(20, table2_distribution(2, 0.5), seed=0)


class TestEncoder:
    def test_dense_example(self):
        H = np.array([[1, 1, 0, 1, 0, 0], [0, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1], [1, 1, 1, 1, 1, 1]])
        code = LdpcCode.from_dense(H)
        assert code.k == 6 - gf2_rank(H)
        rng = np.random.default_rng(0)
        for _ in range(20):
            cw = code.encode(rng.integers(0, 2, code.k))
            assert not np.any(H @ cw % 2)

    def test_peg_code(self):
        code = peg_construct(500, table2_distribution(1, 0.5), seed=3)
        assert code.k == code.n - gf2_rank(code.dense())
        rng = np.random.default_rng(1)
        a, b = rng.integers(0, 2, (2, code.k))
        ca, cb = code.encode(a), code.encode(b)
        assert code.is_codeword(ca) and code.is_codeword(cb)
        np.testing.assert_array_equal(code.encode(a ^ b), ca ^ cb)
        np.testing.assert_array_equal(ca[code.encoder().info_pos], a)

    def test_wrong_length(self):
        code = peg_construct(100, regular_distribution(3, 6), seed=0)
        with pytest.raises(InvalidParameterError):
            code.encode(np.zeros(code.k + 1, dtype=int))


class TestDecoder:
    def test_noiseless(self):
        code = peg_construct(200, regular_distribution(3, 6), seed=0)
        msg = np.random.default_rng(0).integers(0, 2, code.k)
        cw = code.encode(msg)
        r = bp_decode(code, 10.0 * (1 - 2.0 * cw), max_iters=5)
        assert r.converged and r.iterations <= 1
        np.testing.assert_array_equal(r.hard, cw)

    def test_single_flip_corrected(self):
        code = peg_construct(200, regular_distribution(3, 6), seed=0)
        llr = np.full(200, 4.0)
        llr[17] = -1.0
        r = bp_decode(code, llr)
        assert r.converged and not r.hard.any()

    def test_erasures_on_zero_word(self):
        code = peg_construct(200, regular_distribution(3, 6), seed=0)
        llr = np.full(200, 5.0)
        llr[:10] = 0.0
        assert not bp_decode(code, llr).hard.any()

    def test_rejects_bad_input(self):
        code = peg_construct(100, regular_distribution(3, 6), seed=0)
        with pytest.raises(ValueError):
            bp_decode(code, np.zeros(99))
        with pytest.raises(ValueError):
            bp_decode(code, np.full(100, np.nan))

    def test_warm_start_messages_returned(self):
        code = peg_construct(100, regular_distribution(3, 6), seed=0)
        r = bp_decode(code, np.full(100, 2.0), max_iters=3)
        assert r.check_messages.shape == (code.n_edges,)

    def test_bpsk_awgn_fer(self):
        code = peg_construct(1000, table2_distribution(1, 0.5), seed=1)
        ebn0 = 10 ** (3.0 / 10)
        sigma2 = 1.0 / (2 * code.k / code.n * ebn0)
        rng = np.random.default_rng(5)
        errors = 0
        frames = 100
        for _ in range(frames):
            cw = code.encode(rng.integers(0, 2, code.k))
            y = (1 - 2.0 * cw) + np.sqrt(sigma2) * rng.standard_normal(code.n)
            r = bp_decode(code, 2 * y / sigma2, max_iters=50)
            errors += int(np.any(r.hard != cw))
        assert errors / frames < 0.10


class TestExitCurves:
    def test_vnd_degree1_passes_channel(self):
        x = np.linspace(0, 0.99, 20)
        np.testing.assert_allclose(vnd_exit(1, x, 0.3), 0.3, atol=1e-9)

    def test_cnd_limits(self):
        assert cnd_exit(6, 1.0) == pytest.approx(1.0)
        assert cnd_exit(6, 0.0) == pytest.approx(0.0, abs=1e-9)
        assert cnd_exit(2, 0.4) == pytest.approx(0.4, abs=1e-9)

    def test_decoder_monotone_and_bounds(self):
        d = table2_distribution(2, 0.5)
        x = np.linspace(0, 1, 51)
        y = decoder_exit(d, x)
        assert np.all(np.diff(y) >= -1e-9)
        assert y[0] == pytest.approx(0.0, abs=1e-9) and y[-1] == pytest.approx(1.0, abs=1e-6)

    def test_bpsk_threshold_regular(self):
        # the (3,6) ensemble converges near Eb/N0 = 1.1 dB, i.e. Es/N0 = -1.9 dB
        t = bpsk_threshold_db(regular_distribution(3, 6))
        assert -2.3 < t < -1.5


class TestSerialization:
    def test_round_trip(self, tmp_path):
        code = peg_construct(300, table2_distribution(2, 0.5), seed=4)
        assert loads(dumps(code)).same_graph(code)
        p = tmp_path / "c.txt"
        save(code, p)
        assert load(p).same_graph(code)

    def test_malformed(self):
        with pytest.raises(InvalidParameterError):
            loads("4 2\n0 1\n")
        with pytest.raises(InvalidParameterError):
            loads("x y\n")
        with pytest.raises(ConstructionError):
            loads("4 1\n0 0 1\n")
