import numpy as np
import pytest

from lnss.variance import (
    PsiCurve,
    coefficient_of_variation,
    parse_dist,
    psi,
    psi_factored,
    psi_limit,
    psi_table,
    q_std_percentage,
    simulate_q_iteration,
    variance_bound,
)

# 50-digit evaluations of the defining expression
PSI_099 = {5: 0.20004040159183920491, 50: 0.020418939255207513613, 100: 0.010827814372719652647}


class TestPsi:
    def test_unit_at_one_step(self):
        for g in (0.1, 0.5, 0.99, 0.999):
            assert psi(g, 1) == 1.0

    @pytest.mark.parametrize("N,expected", sorted(PSI_099.items()))
    def test_reference_values(self, N, expected):
        assert psi(0.99, N) == pytest.approx(expected, rel=1e-12)

    def test_limit(self):
        assert psi_limit(0.99) == pytest.approx(0.005025125628140703, rel=1e-14)
        assert abs(psi(0.99, 10_000) - psi_limit(0.99)) < 1e-9

    def test_forms_agree(self):
        for g in (0.5, 0.9, 0.99, 0.999):
            for N in range(1, 1001):
                assert psi(g, N) == pytest.approx(psi_factored(g, N), rel=1e-12, abs=1e-15)

    def test_decreasing_and_above_limit(self):
        # N_max keeps gamma**N well above machine epsilon so steps stay resolvable
        for g, N_max in ((0.5, 40), (0.9, 250), (0.99, 2000)):
            values = [p for _, p in PsiCurve.compute(g, N_max).points]
            assert all(a > b for a, b in zip(values, values[1:]))
            assert min(values) > psi_limit(g)

    def test_table_rows(self):
        rows = psi_table([0.9, 0.99], 3)
        assert [(g, N) for g, N, _ in rows] == [(0.9, 1), (0.9, 2), (0.9, 3), (0.99, 1), (0.99, 2), (0.99, 3)]

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            psi(1.0, 10)


class TestBound:
    def test_first_term(self):
        assert variance_bound(0.99, 1 / 12, 1)[0] == pytest.approx(1 / 12)

    def test_hand_sum(self):
        np.testing.assert_allclose(variance_bound(0.5, 1.0, 3), [1.0, 1.25, 1.3125])

    def test_zero_variance(self):
        assert not variance_bound(0.9, 0.0, 10).any()

    def test_scaled_by_psi(self):
        np.testing.assert_allclose(variance_bound(0.9, 2.0, 5, 0.25), 0.25 * variance_bound(0.9, 2.0, 5))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            variance_bound(0.9, -1.0, 3)


class TestSimulation:
    def test_constant_rewards_have_no_variance(self):
        single, lnss = simulate_q_iteration(0.9, 10, trials=200, iterations=20, dist="const:2.0")
        assert not single.empirical_var.any()
        assert not lnss.empirical_var.any()

    def test_one_step_traces_match_statistically(self):
        single, lnss = simulate_q_iteration(0.9, 1, trials=20_000, iterations=30, seed=3)
        np.testing.assert_allclose(lnss.empirical_var, single.empirical_var, rtol=0.05)

    def test_too_few_trials(self):
        with pytest.raises(ValueError, match="insufficient replicates"):
            simulate_q_iteration(0.9, 5, trials=50)

    def test_surrogate_variance_is_psi_times_reward_variance(self):
        # first backup: var[r'] = psi * var[r] exactly for IID rewards
        trials = 200_000
        _, lnss = simulate_q_iteration(0.99, 20, trials=trials, iterations=1, seed=7)
        se = lnss.standard_error[0]
        assert abs(lnss.empirical_var[0] - psi(0.99, 20) / 12) < 4 * se

    def test_bernoulli_variance(self):
        sampler, var = parse_dist("bern:0.3")
        assert var == pytest.approx(0.21)
        x = sampler(np.random.default_rng(0), 200_000)
        assert set(np.unique(x)) <= {0.0, 1.0}
        assert x.var() == pytest.approx(0.21, rel=0.02)

    def test_unknown_dist(self):
        with pytest.raises(ValueError):
            parse_dist("gauss")


class TestMetrics:
    def test_cv(self):
        assert coefficient_of_variation([3.0, 3.0, 3.0]) == 0.0
        assert coefficient_of_variation([1.0, 3.0]) == 0.5
        assert coefficient_of_variation([2.0]) == 0.0

    def test_cv_zero_mean(self):
        with pytest.raises(ValueError, match="CV undefined"):
            coefficient_of_variation([-1.0, 1.0])

    def test_q_std_pct(self):
        assert q_std_percentage([5, 5, 5, 5]) == 0.0
        assert q_std_percentage([1, 3]) == 50.0
        assert q_std_percentage([-2, -2]) == 0.0
        assert q_std_percentage([-1, -3]) == 50.0
        with pytest.raises(ValueError):
            q_std_percentage([])
