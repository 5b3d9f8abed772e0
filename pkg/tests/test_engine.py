import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from fheston import (
    CallPayoff,
    ConstantSigma,
    GridSpec,
    IndicatorPayoff,
    LinearSigma,
    ModelParams,
    PiecewiseLinearPayoff,
    ShiftedPowerSigma,
)
from fheston.contracts import TABLE_PAYOFFS
from fheston.drivers import DriverIncrements
from fheston.engine import (
    ExperimentSpec,
    check_ladder,
    compare_estimators,
    convergence_study,
    naive_estimate,
    naive_values,
    path_contributions,
    run_experiment,
    run_payoffs,
    simulate_paths,
    smoothed_estimate,
    summarize,
)
from fheston.exceptions import DomainError, InvalidSigmaError, UsageError
from fheston.model import simulate_price_terminal, simulate_vol_path


def constant_payoff(c):
    return PiecewiseLinearPayoff((0.0,), (c,), (0.0,))


def spec(**kw):
    base = dict(
        params=ModelParams(),
        grid=GridSpec(50),
        sigma=ShiftedPowerSigma(),
        payoff=IndicatorPayoff(0.5, 1.0),
        paths_per_estimate=200,
        num_estimates=4,
        seed=3,
    )
    base.update(kw)
    return ExperimentSpec(**base)


class TestSummarize:
    def test_constant(self):
        s = summarize([1, 1, 1])
        assert (s.mean, s.sd, s.cv) == (1, 0, 0)

    def test_quartiles_linear_rule(self):
        s = summarize([4, 1, 3, 2])
        assert (s.mean, s.median, s.q1, s.q3, s.min, s.max) == (2.5, 2.5, 1.75, 3.25, 1, 4)
        assert s.sd == pytest.approx(math.sqrt(5 / 3), rel=1e-15)
        assert s.cv == pytest.approx(s.sd / 2.5)

    def test_single(self):
        s = summarize([0.3])
        assert s.min == s.median == s.max == s.mean == 0.3 and s.sd == 0

    def test_empty(self):
        with pytest.raises(UsageError):
            summarize([])

    def test_zero_mean_cv(self):
        assert math.isnan(summarize([-1, 1]).cv)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_order_and_permutation_invariance(self, xs):
        s = summarize(xs)
        assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
        assert np.array_equal(summarize(xs[::-1]).as_row(), s.as_row(), equal_nan=True)


class TestSpec:
    def test_bad_counts(self):
        with pytest.raises(UsageError):
            spec(paths_per_estimate=0)
        with pytest.raises(UsageError):
            spec(num_estimates=0)

    def test_bad_estimator(self):
        with pytest.raises(UsageError):
            spec(estimator="fancy")

    def test_horizon_mismatch(self):
        with pytest.raises(UsageError):
            spec(grid=GridSpec(50, 2.0))

    def test_linear_sigma_needs_independence(self):
        with pytest.raises(DomainError):
            spec(sigma=LinearSigma(0.5), params=ModelParams(rho=0.2))
        spec(sigma=LinearSigma(0.5), estimator="naive")

    def test_smoothing_refused_without_lower_bound(self):
        with pytest.raises(InvalidSigmaError):
            smoothed_estimate(spec(sigma=LinearSigma(0.5)))

    def test_smoothing_refused_at_full_correlation(self):
        with pytest.raises(InvalidSigmaError):
            smoothed_estimate(spec(params=ModelParams(rho=1.0)))


class TestEstimators:
    def test_constant_payoff_naive_exact(self):
        assert naive_estimate(spec(payoff=constant_payoff(0.37))) == 0.37

    def test_constant_payoff_smoothed_mean(self):
        s = spec(payoff=constant_payoff(2.0), paths_per_estimate=20_000)
        vals = path_contributions(s, {"c": s.payoff}, 0)["c"]["smoothed"]
        assert abs(vals.mean() - 2.0) < 4 * vals.std() / math.sqrt(vals.size)

    def test_deterministic_model(self):
        p = ModelParams(nu=0.0, mu=0.2)
        g = GridSpec(20)
        z = np.zeros((1, 20))
        d = DriverIncrements(z, z, z, z)
        res = simulate_price_terminal(d, simulate_vol_path(d, g, p), g, p, ConstantSigma(0.3))
        f = CallPayoff(1.0)
        assert naive_values(f, res)[0] == pytest.approx(f(math.exp(0.2 - 0.045)), rel=1e-14)

    def test_estimate_index_selects_disjoint_paths(self):
        s = spec()
        assert smoothed_estimate(s, 0) != smoothed_estimate(s, 1)
        assert smoothed_estimate(s, 1) == smoothed_estimate(s, 1)

    def test_paths_shared_across_payoffs(self):
        s = spec(num_estimates=2)
        both = run_payoffs(s, {"a": IndicatorPayoff(0.5, 1.0), "b": CallPayoff(1.0)})
        alone = run_experiment(s)
        assert np.array_equal(both["a"].estimates["smoothed"], alone.estimates["smoothed"])

    def test_conditional_lognormal_oracle(self):
        # given Y with rho = 0, log S_T is normal; averaging the closed form over Y paths
        # is an independent estimate of the indicator price
        s = spec(paths_per_estimate=40_000, grid=GridSpec(50))
        res = simulate_paths(s, np.arange(40_000, 80_000))
        sig = s.sigma(res.volPath[:, :-1])
        v = np.sum(sig**2, axis=1) * s.grid.delta
        m = 0.5 - 0.5 * v
        oracle = np.mean(norm.cdf((0 - m) / np.sqrt(v)) - norm.cdf((math.log(0.5) - m) / np.sqrt(v)))
        vals = path_contributions(s, {"f": s.payoff}, 0)["f"]["smoothed"]
        assert abs(vals.mean() - oracle) < 4 * vals.std() / math.sqrt(vals.size)

    @pytest.mark.parametrize("rho", [-0.5, 0.6])
    def test_correlated_estimators_agree(self, rho):
        s = spec(params=ModelParams(rho=rho), grid=GridSpec(32), paths_per_estimate=30_000)
        cmp = compare_estimators(s, {"ind": IndicatorPayoff(0.5, 1.0), "call": CallPayoff(1.0)})
        for c in cmp.values():
            assert c.z < 4

    def test_strike_monotonicity(self):
        s = spec(paths_per_estimate=20_000, num_estimates=1)
        out = run_payoffs(s, {k: CallPayoff(k) for k in (0.8, 1.0, 1.2, 1.5)})
        vals = [out[k].summary.mean for k in (0.8, 1.0, 1.2, 1.5)]
        contrib = path_contributions(s, {"c": CallPayoff(0.8)}, 0)["c"]["smoothed"]
        tol = 3 * contrib.std() / math.sqrt(contrib.size)
        assert all(a >= b - tol for a, b in zip(vals, vals[1:]))


class TestExperiment:
    def test_determinism(self):
        s = spec()
        a = run_experiment(s).estimates["smoothed"]
        b = run_experiment(s).estimates["smoothed"]
        assert np.array_equal(a, b)

    def test_thread_count_invariance(self):
        s = spec(num_estimates=6, estimator="both")
        a = run_experiment(s, threads=1)
        b = run_experiment(s, threads=3)
        for k in ("naive", "smoothed"):
            assert np.array_equal(a.estimates[k], b.estimates[k])
        assert a.summary == b.summary

    def test_single_estimate(self):
        r = run_experiment(spec(num_estimates=1))
        s = r.summary
        assert s.sd == 0 and s.min == s.max == s.mean

    def test_condition_warning(self):
        with pytest.warns(RuntimeWarning, match="parameter condition"):
            run_experiment(spec(params=ModelParams(nu=0.5), num_estimates=1))


class TestConvergence:
    def test_ladder_validation(self):
        assert check_ladder([8, 16, 64]) == [8, 16, 64]
        for bad in ([], [16, 8], [8, 12], [0, 8]):
            with pytest.raises(UsageError):
                check_ladder(bad)

    def test_identical_levels_zero_error(self):
        rep = convergence_study(ModelParams(), ShiftedPowerSigma(), CallPayoff(1.0), [64, 64], 500)
        assert all(r.strong_err_L2 == 0 and r.weak_err == 0 and r.path_err_L2 == 0 for r in rep.rows)

    def test_errors_shrink_with_refinement(self):
        rep = convergence_study(ModelParams(), ShiftedPowerSigma(), IndicatorPayoff(0.5, 1.0), [16, 32, 64, 256], 2000)
        errs = [r.strong_err_L2 for r in rep.rows]
        assert errs[0] > errs[1] > errs[2] > errs[3] == 0
        assert rep.rows[-1].weak_err == 0
        assert np.isfinite(rep.strong_slope) and np.isfinite(rep.path_slope)

    def test_constant_sigma_weak_error_vanishes(self):
        # sigma does not see Y, and coarsened Wiener sums are exact, so every level prices identically
        rep = convergence_study(ModelParams(), ConstantSigma(0.5), IndicatorPayoff(0.5, 1.0), [16, 64, 256], 2000)
        assert max(r.weak_err for r in rep.rows) < 1e-12

    @settings(max_examples=5, deadline=None)
    @given(st.sampled_from([[8, 16], [4, 8, 32], [2, 2, 4]]))
    def test_rows_match_ladder(self, ladder):
        rep = convergence_study(ModelParams(), ShiftedPowerSigma(), CallPayoff(1.0), ladder, 50)
        assert [r.n for r in rep.rows] == ladder
        assert [r.delta for r in rep.rows] == [1 / n for n in ladder]


def test_table_payoffs_are_smoothable():
    s = spec(paths_per_estimate=100, num_estimates=1)
    out = run_payoffs(s, TABLE_PAYOFFS)
    assert set(out) == {"call", "indicator", "staircase"}


@pytest.mark.slow
def test_uniform_path_error_rate_near_hurst():
    # the time-uniform error of the piecewise-constant path decays like delta^H;
    # a far finer reference keeps the fitted slope free of reference error
    rep = convergence_study(ModelParams(), ShiftedPowerSigma(), IndicatorPayoff(0.5, 1.0), [16, 32, 64, 128, 2048], 2000)
    assert 0.5 <= rep.path_slope <= 0.9
