import numpy as np
import pytest

from gbmdiff.errors import EstimatorError
from gbmdiff.metrics import (
    acf_abs,
    aggregate_report,
    fit_beta,
    hill_estimator,
    leverage,
    leverage_bootstrap_se,
    tail_exponent,
)
from gbmdiff.synthetic import (
    asymmetric_shock_returns,
    garch_returns,
    pareto_returns,
    student_t_returns,
)


class TestTailExponent:
    def test_student_t4_recovers_density_exponent(self):
        r = student_t_returns(1_000_000, df=4.0, seed=2)
        fit = tail_exponent(r)
        assert abs(fit.alpha - 5.0) < 0.4

    def test_pareto_recovers_density_exponent(self):
        r = pareto_returns(1_000_000, density_exponent=4.0, seed=3)
        fit = tail_exponent(r)
        assert abs(fit.alpha - 4.0) < 0.3

    def test_hill_cross_check_on_pareto(self):
        r = pareto_returns(1_000_000, density_exponent=4.0, seed=5)
        fit = tail_exponent(r)
        hill_alpha = hill_estimator(r, tail_frac=0.05) + 1.0
        assert abs(fit.alpha - hill_alpha) < 0.5

    def test_scale_invariance(self):
        r = student_t_returns(50_000, df=4.0, seed=7)
        a = tail_exponent(r).alpha
        b = tail_exponent(123.4 * r).alpha
        assert a == pytest.approx(b, abs=1e-9)

    def test_requires_enough_observations(self):
        with pytest.raises(EstimatorError):
            tail_exponent(np.random.default_rng(0).normal(size=5_000))

    def test_requires_enough_tail_points(self):
        # a tight uniform has nothing beyond 2 normalized units
        r = np.random.default_rng(0).uniform(-1, 1, 20_000)
        with pytest.raises(EstimatorError):
            tail_exponent(r)

    def test_zero_variance_rejected(self):
        with pytest.raises(EstimatorError):
            tail_exponent(np.ones(20_000))

    def test_density_curve_emitted_for_plots(self):
        r = student_t_returns(100_000, df=4.0, seed=11)
        fit = tail_exponent(r)
        assert fit.bin_centers.size == fit.bin_density.size > 10
        assert np.all(fit.bin_density > 0)


class TestAcfAbs:
    def test_manual_oracle_small_series(self):
        r = np.array([0.3, -0.1, 0.25, -0.4, 0.05, 0.2])
        x = np.abs(r)
        x = x - x.mean()
        n = len(x)
        expected_lag2 = (x[:-2] @ x[2:]) / n / ((x @ x) / n)
        out = acf_abs(r, 2)
        assert out[1] == pytest.approx(expected_lag2, rel=1e-12)

    def test_iid_normal_within_white_noise_band(self):
        n = 100_000
        r = np.random.default_rng(13).normal(size=n)
        out = acf_abs(r, 100)
        band = 3.0 / np.sqrt(n)
        assert np.mean(np.abs(out) < band) >= 0.95

    def test_garch_positive_out_to_lag_100(self):
        r = garch_returns(100_000, omega=1e-5, alpha=0.09, beta=0.90, seed=17)
        out = acf_abs(r, 100)
        assert np.all(out > 0)

    def test_constant_series_rejected(self):
        with pytest.raises(EstimatorError):
            acf_abs(np.full(1000, 0.5), 10)

    def test_squared_variant(self):
        r = garch_returns(20_000, seed=19)
        out = acf_abs(r, 20, use_squared=True)
        assert out.shape == (20,)
        assert np.all(np.abs(out) <= 1.0)


class TestFitBeta:
    def test_exact_power_law(self):
        k = np.arange(1, 101)
        assert fit_beta(k ** -0.3) == pytest.approx(0.3, abs=1e-9)

    def test_scale_invariance(self):
        k = np.arange(1, 101)
        assert fit_beta(7.7 * k ** -0.3) == pytest.approx(0.3, abs=1e-9)

    def test_garch_beta_in_wide_band(self):
        r = garch_returns(100_000, omega=1e-5, alpha=0.09, beta=0.90, seed=23)
        beta = fit_beta(acf_abs(r, 100))
        assert 0.05 <= beta <= 0.6

    def test_too_few_usable_lags(self):
        acf = -np.ones(100)
        acf[:5] = 0.5
        with pytest.raises(EstimatorError):
            fit_beta(acf)


class TestLeverage:
    def test_constant_returns_give_zero(self):
        out = leverage(np.full(500, 0.02), max_lag=20)
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(EstimatorError):
            leverage(np.zeros(500), max_lag=20)

    def test_iid_within_bootstrap_band(self):
        r = np.random.default_rng(29).normal(size=100_000)
        lev = leverage(r, max_lag=100)
        se = leverage_bootstrap_se(r, max_lag=100, n_boot=64, seed=1)
        assert np.mean(np.abs(lev) < 3 * se) >= 0.95

    def test_planted_asymmetry_negative_l1(self):
        r = asymmetric_shock_returns(100_000, shock_scale=2.0, seed=31)
        lev = leverage(r, max_lag=5)
        assert lev[1] < 0

    def test_time_reversal_of_iid_stays_in_band(self):
        r = np.random.default_rng(37).normal(size=100_000)
        lev = leverage(r[::-1], max_lag=100)
        se = leverage_bootstrap_se(r[::-1], max_lag=100, n_boot=64, seed=2)
        assert np.mean(np.abs(lev) < 3 * se) >= 0.95

    def test_scaling_is_inverse_of_scale(self):
        # L(k; c r) = L(k; r) / c for the lead-lag formula
        r = np.random.default_rng(41).normal(size=5_000)
        c = 3.0
        base = leverage(r, max_lag=10)
        scaled = leverage(c * r, max_lag=10)
        np.testing.assert_allclose(scaled * c, base, atol=1e-9)

    def test_needs_enough_data(self):
        with pytest.raises(EstimatorError):
            leverage(np.random.default_rng(0).normal(size=50), max_lag=100)


class TestAggregateReport:
    def _series(self, n_series=4, n=6_000, seed=43):
        rng = np.random.default_rng(seed)
        return [rng.standard_t(4, n) for _ in range(n_series)]

    def test_single_series_equals_per_series_metrics(self):
        series = self._series(1, 20_000)
        report = aggregate_report(series, max_lag_acf=50, max_lag_leverage=50)
        np.testing.assert_allclose(report.acf, acf_abs(series[0], 50))
        np.testing.assert_allclose(report.leverage, leverage(series[0], 50))
        assert report.alpha == pytest.approx(tail_exponent(series[0]).alpha)
        assert report.n_series == 1

    def test_permutation_invariant(self):
        series = self._series()
        a = aggregate_report(series, 30, 30)
        b = aggregate_report(series[::-1], 30, 30)
        assert a.alpha == b.alpha
        np.testing.assert_array_equal(a.acf, b.acf)
        np.testing.assert_array_equal(a.leverage, b.leverage)

    def test_halves_average_pointwise(self):
        series = self._series(4)
        full = aggregate_report(series, 30, 30)
        first = aggregate_report(series[:2], 30, 30)
        second = aggregate_report(series[2:], 30, 30)
        np.testing.assert_allclose(
            full.acf, (first.acf + second.acf) / 2, rtol=1e-12
        )
        np.testing.assert_allclose(
            full.leverage, (first.leverage + second.leverage) / 2, rtol=1e-10,
            atol=1e-12,
        )

    def test_report_serializes(self):
        report = aggregate_report(self._series(2, 10_000), 20, 20)
        blob = report.to_json()
        assert '"alpha"' in blob and '"leverage"' in blob
