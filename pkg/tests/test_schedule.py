import math

import numpy as np
import pytest
from scipy.integrate import quad

from gbmdiff.schedule import NoiseSchedule, ScheduleKind

KINDS = list(ScheduleKind)


def make(kind, lo=0.01, hi=1.0):
    return NoiseSchedule(kind=kind, sigma_min=lo, sigma_max=hi)


class TestConstruction:
    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            NoiseSchedule(kind="linear", sigma_min=0.5, sigma_max=0.5)
        with pytest.raises(ValueError):
            NoiseSchedule(kind="linear", sigma_min=-0.1, sigma_max=1.0)
        with pytest.raises(ValueError):
            NoiseSchedule(kind="linear", sigma_min=1.0, sigma_max=0.01)

    def test_kind_coerced_from_string(self):
        s = NoiseSchedule(kind="cosine")
        assert s.kind is ScheduleKind.COSINE

    @pytest.mark.parametrize("kind", KINDS)
    def test_rejects_out_of_range_t(self, kind):
        s = make(kind)
        for fn in (s.sigma, s.sigma_sq_rate, s.sigma_sq_integral):
            with pytest.raises(ValueError):
                fn(-0.01)
            with pytest.raises(ValueError):
                fn(1.01)


class TestSigma:
    @pytest.mark.parametrize("kind", KINDS)
    def test_endpoints(self, kind):
        s = make(kind)
        assert abs(s.sigma(0.0) - 0.01) < 1e-12
        assert abs(s.sigma(1.0) - 1.0) < 1e-12

    @pytest.mark.parametrize("kind,lo,hi", [
        ("linear", 0.05, 2.0),
        ("exponential", 0.003, 0.7),
        ("cosine", 0.2, 5.0),
    ])
    def test_endpoints_general_bounds(self, kind, lo, hi):
        s = make(kind, lo, hi)
        assert abs(s.sigma(0.0) - lo) < 1e-12
        assert abs(s.sigma(1.0) - hi) < 1e-12

    def test_midpoint_values(self):
        # Each expected value evaluated from the closed formula by hand:
        # exponential: 0.01 * (1.0/0.01)**0.5 = 0.1
        assert make("exponential").sigma(0.5) == pytest.approx(0.1, abs=1e-12)
        # cosine: 0.01 + 0.99 * (1 - cos(pi/2)) / 2 = 0.505
        assert make("cosine").sigma(0.5) == pytest.approx(0.505, abs=1e-12)
        # linear: sqrt(0.0001 + 0.5 * 0.9999) = sqrt(0.50005)
        assert make("linear").sigma(0.5) == pytest.approx(
            math.sqrt(0.50005), abs=1e-12
        )

    @pytest.mark.parametrize("kind", KINDS)
    def test_monotone_on_fine_grid(self, kind):
        s = make(kind)
        vals = s.sigma(np.linspace(0.0, 1.0, 10_000))
        assert np.all(np.diff(vals) >= 0.0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_vectorized_matches_scalar(self, kind):
        s = make(kind)
        ts = np.linspace(0.0, 1.0, 17)
        vec = s.sigma(ts)
        assert vec.shape == ts.shape
        for t, v in zip(ts, vec):
            assert s.sigma(float(t)) == v


class TestSigmaSqRate:
    def test_linear_constant(self):
        s = make("linear")
        for t in (0.0, 0.3, 1.0):
            assert s.sigma_sq_rate(t) == pytest.approx(0.9999, abs=1e-15)

    def test_exponential_midpoint(self):
        # d/dt [lo^2 exp(2ct)] = 2c sigma(t)^2 with c = ln(hi/lo);
        # at t = 0.5: 2 ln(100) * 0.01 = 0.0921034...
        expected = 2.0 * math.log(100.0) * 0.01
        assert make("exponential").sigma_sq_rate(0.5) == pytest.approx(
            expected, rel=1e-12
        )

    def test_cosine_zero_at_origin(self):
        assert make("cosine").sigma_sq_rate(0.0) == 0.0

    @pytest.mark.parametrize("kind", KINDS)
    def test_matches_finite_difference_of_sigma_sq(self, kind):
        s = make(kind)
        ts = np.linspace(0.0, 1.0, 10_000)
        h = 1e-7
        inner = ts[(ts > 2 * h) & (ts < 1 - 2 * h)]
        fd = (s.sigma(inner + h) ** 2 - s.sigma(inner - h) ** 2) / (2 * h)
        rate = s.sigma_sq_rate(inner)
        rel = np.abs(fd - rate) / np.maximum(np.abs(rate), 1e-12)
        assert np.max(rel) < 1e-4


class TestSigmaSqIntegral:
    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_at_origin(self, kind):
        assert make(kind).sigma_sq_integral(0.0) == 0.0

    def test_linear_closed_form(self):
        # 0.0001 * 1 + 0.9999 / 2 = 0.50005
        assert make("linear").sigma_sq_integral(1.0) == pytest.approx(
            0.50005, abs=1e-15
        )

    def test_cosine_against_trapezoid_oracle(self):
        s = make("cosine")
        ts = np.linspace(0.0, 1.0, 1_000_001)
        oracle = np.trapezoid(s.sigma(ts) ** 2, ts)
        assert s.sigma_sq_integral(1.0) == pytest.approx(oracle, abs=1e-8)

    @pytest.mark.parametrize("kind", KINDS)
    def test_against_adaptive_quadrature_oracle(self, kind):
        s = make(kind)
        for t in (0.2, 0.5, 0.8, 1.0):
            oracle, err = quad(lambda u: s.sigma(u) ** 2, 0.0, t, epsabs=1e-12)
            assert s.sigma_sq_integral(t) == pytest.approx(oracle, abs=1e-10)

    @pytest.mark.parametrize("kind", KINDS)
    def test_derivative_recovers_sigma_sq(self, kind):
        s = make(kind)
        ts = np.linspace(0.0, 1.0, 10_000)
        h = 1e-6
        inner = ts[(ts > 2 * h) & (ts < 1 - 2 * h)]
        fd = (
            np.asarray(s.sigma_sq_integral(inner + h))
            - np.asarray(s.sigma_sq_integral(inner - h))
        ) / (2 * h)
        target = s.sigma(inner) ** 2
        rel = np.abs(fd - target) / np.maximum(np.abs(target), 1e-12)
        assert np.max(rel) < 1e-4
