"""Synthetic return generators used by the built-in oracle suite.

These give the estimators known ground truth: GARCH(1,1) for volatility
clustering, symmetric Pareto and Student-t for tail exponents, and a
planted sign/volatility asymmetry for the leverage check.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "garch_returns",
    "student_t_returns",
    "pareto_returns",
    "asymmetric_shock_returns",
    "garch_window_dataset",
]


def garch_returns(n: int, omega: float = 1e-5, alpha: float = 0.09,
                  beta: float = 0.90, seed: int = 0, burn: int = 1000) -> np.ndarray:
    """GARCH(1,1): r_t = sigma_t z_t, sigma_t^2 = omega + alpha r_{t-1}^2 + beta sigma_{t-1}^2."""
    if alpha + beta >= 1.0:
        raise ValueError("GARCH stationarity requires alpha + beta < 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    r = np.empty(n + burn)
    var = omega / (1.0 - alpha - beta)
    r[0] = np.sqrt(var) * z[0]
    for t in range(1, n + burn):
        var = omega + alpha * r[t - 1] ** 2 + beta * var
        r[t] = np.sqrt(var) * z[t]
    return r[burn:]


def student_t_returns(n: int, df: float = 4.0, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_t(df, n)


def pareto_returns(n: int, density_exponent: float = 4.0, xm: float = 1.0,
                   seed: int = 0) -> np.ndarray:
    """Symmetric Pareto tails: density ~ |r|^-density_exponent for |r| >= xm."""
    if density_exponent <= 1.0:
        raise ValueError("density exponent must exceed 1")
    tail_index = density_exponent - 1.0
    rng = np.random.default_rng(seed)
    magnitude = xm * rng.uniform(size=n) ** (-1.0 / tail_index)
    sign = rng.choice([-1.0, 1.0], size=n)
    return sign * magnitude


def asymmetric_shock_returns(n: int, shock_scale: float = 2.0,
                             seed: int = 0) -> np.ndarray:
    """iid signs but a negative return doubles the next step's volatility."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    r = np.empty(n)
    r[0] = z[0]
    for t in range(1, n):
        scale = shock_scale if r[t - 1] < 0 else 1.0
        r[t] = scale * z[t]
    return r


def garch_window_dataset(n_windows: int, length: int, seed: int = 0,
                         omega: float = 1e-5, alpha: float = 0.09,
                         beta: float = 0.90) -> np.ndarray:
    """(n_windows, length) array of independent GARCH(1,1) return windows."""
    out = np.empty((n_windows, length))
    for i in range(n_windows):
        out[i] = garch_returns(length, omega, alpha, beta, seed=seed * 1_000_003 + i,
                               burn=500)
    return out
