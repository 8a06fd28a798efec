import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from ngcn.metrics import rmse_mae
from ngcn.stats import friedman_mean_ranks, wilcoxon_signed_rank

from conftest import GRID, GRID_MODELS, brute_force_wilcoxon


class TestRmseMae:
    def test_perfect(self):
        m = rmse_mae([0.3, 0.7], [0.3, 0.7])
        assert (m.rmse, m.mae, m.n) == (0.0, 0.0, 2)

    def test_single_pair(self):
        m = rmse_mae([(1.0, 0.5)])
        assert m.rmse == 0.5 and m.mae == 0.5

    def test_worked_example(self):
        m = rmse_mae([(1, 0), (0, 1), (1, 1), (0, 0)])
        assert m.rmse == pytest.approx(np.sqrt(0.5), abs=1e-12)
        assert m.mae == pytest.approx(0.5, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            rmse_mae([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse_mae([1.0, 2.0], [1.0])

    def test_non_finite_propagates(self):
        assert np.isnan(rmse_mae([0.1, 0.2], [0.1, np.nan]).rmse)
        assert rmse_mae([0.1, 0.2], [0.1, np.inf]).rmse == np.inf

    def test_tiny_errors_do_not_underflow(self):
        m = rmse_mae([0.0], [1e-300])
        assert m.rmse == m.mae == 1e-300

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30))
    def test_rmse_dominates_mae(self, pairs):
        m = rmse_mae(pairs)
        assert m.rmse >= m.mae * (1 - 1e-12) >= 0


class TestWilcoxon:
    def test_all_positive_n8(self):
        r = wilcoxon_signed_rank([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
        assert (r.r_plus, r.r_minus) == (36, 0)
        assert r.p_value == 1 / 256
        assert r.p_value == pytest.approx(0.003906, abs=1e-6)

    def test_smallest_negative_n8(self):
        r = wilcoxon_signed_rank([-0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
        assert (r.r_plus, r.r_minus) == (35, 1)
        assert r.p_value == 2 / 256
        assert r.p_value == pytest.approx(0.007813, abs=1e-6)

    def test_reference_grid_pairs(self):
        expected = {"M6": (35, 1, 0.007813)}
        for k, m in enumerate(GRID_MODELS[:-1]):
            r = wilcoxon_signed_rank(GRID[:, k] - GRID[:, -1])
            r_plus, r_minus, p = expected.get(m, (36, 0, 0.003906))
            assert (r.r_plus, r.r_minus) == (r_plus, r_minus)
            assert r.p_value == pytest.approx(p, abs=1e-6)

    def test_sign_flip_swaps(self):
        d = np.random.default_rng(0).normal(size=9)
        a, b = wilcoxon_signed_rank(d), wilcoxon_signed_rank(-d)
        assert (a.r_plus, a.r_minus) == (b.r_minus, b.r_plus)

    def test_zeros_dropped(self):
        r = wilcoxon_signed_rank([0.0, 1.0, 2.0, 0.0])
        assert r.n == 2 and (r.r_plus, r.r_minus) == (3, 0) and r.p_value == 0.25

    def test_all_zero(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([0.0, 0.0])

    @pytest.mark.parametrize("n", range(1, 13))
    def test_exact_matches_enumeration(self, n):
        rng = np.random.default_rng(n)
        for trial in range(3):
            d = rng.normal(size=n)
            if trial == 2 and n > 3:  # force tied magnitudes
                d[1] = -d[0]
                d[3] = d[2]
            r = wilcoxon_signed_rank(d)
            bp, bm, bp_value = brute_force_wilcoxon(d)
            assert r.r_plus == pytest.approx(bp) and r.r_minus == pytest.approx(bm)
            assert r.p_value == pytest.approx(bp_value, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40))
    def test_rank_sum_identity(self, diffs):
        d = np.array(diffs)
        if not np.any(d != 0):
            return
        r = wilcoxon_signed_rank(d)
        assert r.r_plus + r.r_minus == pytest.approx(r.n * (r.n + 1) / 2)
        assert 0.0 <= r.p_value <= 1.0

    def test_scipy_cross_check(self):
        d = np.random.default_rng(7).normal(0.3, 1, size=15)
        ours = wilcoxon_signed_rank(d).p_value
        ref = sps.wilcoxon(d, alternative="greater", method="exact").pvalue
        assert ours == pytest.approx(ref, rel=1e-12)

    def test_large_n_uses_normal_approximation(self):
        d = np.random.default_rng(8).normal(0.2, 1, size=60)
        ours = wilcoxon_signed_rank(d).p_value
        ref = sps.wilcoxon(d, alternative="greater", method="approx", correction=True).pvalue
        assert ours == pytest.approx(ref, rel=1e-9)


class TestFriedman:
    def test_dominant_model(self):
        x = np.array([[3.0, 2.0, 1.0], [5.0, 4.0, 0.5]])
        r = friedman_mean_ranks(x, ["a", "b", "c"])
        np.testing.assert_array_equal(r.mean_ranks, [3.0, 2.0, 1.0])

    def test_tie_average_rank(self):
        r = friedman_mean_ranks([[0.1, 0.2, 0.2, 0.3]])
        np.testing.assert_array_equal(r.mean_ranks, [1.0, 2.5, 2.5, 4.0])

    def test_incomplete(self):
        with pytest.raises(ValueError):
            friedman_mean_ranks([[0.1, np.nan], [0.2, 0.3]])

    def test_reference_grid_reference_model(self):
        r = friedman_mean_ranks(GRID, GRID_MODELS)
        assert r.mean_ranks[-1] == 1.125
        assert round(r.mean_ranks[-1], 1) == 1.1
        assert np.all(r.mean_ranks[:-1] > r.mean_ranks[-1])

    def test_reference_grid_all_ranks_after_tie_resolution(self):
        # M1 and M7 print as 0.05030 on D3 MAE; ranking M7 ahead there reproduces every published rank
        r = friedman_mean_ranks(GRID, GRID_MODELS)
        np.testing.assert_allclose(r.mean_ranks, [5.9375, 4.875, 5.5, 7.0, 4.375, 3.625, 3.5625, 1.125])
        broken = GRID.copy()
        broken[5, 6] -= 1e-9
        ranks = friedman_mean_ranks(broken, GRID_MODELS).mean_ranks
        np.testing.assert_allclose(np.round(ranks, 1), [6.0, 4.9, 5.5, 7.0, 4.4, 3.6, 3.5, 1.1])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 10), st.integers(2, 9), st.integers(0, 10 ** 6))
    def test_mean_rank_average(self, n, k, seed):
        x = np.random.default_rng(seed).integers(0, 4, size=(n, k)).astype(float)
        r = friedman_mean_ranks(x)
        assert r.mean_ranks.mean() == pytest.approx((k + 1) / 2)

    def test_chi_square_against_scipy_without_ties(self):
        x = np.random.default_rng(3).normal(size=(8, 5))
        r = friedman_mean_ranks(x)
        ref = sps.friedmanchisquare(*x.T)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-10)
