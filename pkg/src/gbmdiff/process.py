"""Forward diffusion processes and their analytic transition kernels.

Three forward SDEs over a fixed horizon [0, T]:

* VE:   dx = sqrt(d[sigma_t^2]/dt) dW          -> x_t ~ N(x_0, sigma_t^2 I)
* VP:   dx = -1/2 sigma_t^2 x dt + sigma_t dW  -> x_t ~ N(sqrt(a_t) x_0, (1 - a_t) I),
        a_t = exp(-int_0^t sigma_s^2 ds)
* GBM:  multiplicative price noise dS = mu_t S dt + sigma_t S dW with
        mu_t = sigma_t^2 / 2, which in log-price space reduces exactly to
        the VE SDE. All GBM dynamics here therefore run through the same
        code path as VE; the price-level coupling appears only through
        the log/price mapping.

The reverse-time step follows Anderson's form
x' = x - [f(x,t) - g(t)^2 score] dt + g(t) sqrt(dt) noise, integrated from
T down to the floor EPS_T to avoid the vanishing-noise endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError
from .schedule import NoiseSchedule

__all__ = [
    "EPS_T",
    "ProcessKind",
    "DiffusionProcess",
    "GaussianKernel",
    "to_log_space",
    "to_price_space",
]

# Reverse-time integration floor: generation and score-target evaluation
# stop here rather than at t=0 where the kernel std degenerates.
EPS_T = 1e-3


class ProcessKind(str, Enum):
    VE = "ve"
    VP = "vp"
    GBM = "gbm"


@dataclass(frozen=True)
class GaussianKernel:
    """Isotropic Gaussian transition law N(mean, std^2 I)."""

    mean: np.ndarray
    std: float

    def __post_init__(self):
        if not self.std > 0.0:
            raise ValueError(f"kernel std must be positive, got {self.std}")


@dataclass(frozen=True)
class DiffusionProcess:
    kind: ProcessKind
    schedule: NoiseSchedule
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    # -- time handling -------------------------------------------------

    def _frac(self, t):
        """Map process time in [0, T] to schedule time in [0, 1]."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0.0) or np.any(tt > self.horizon):
            raise ValueError(f"time must lie in [0, {self.horizon}], got {t!r}")
        return tt / self.horizon

    # -- forward SDE coefficients ---------------------------------------

    def drift(self, x, t):
        """f(x, t): zero for VE/GBM, -1/2 sigma(t)^2 x for VP."""
        s = self._frac(t)
        x = np.asarray(x, dtype=float)
        if self.kind is ProcessKind.VP:
            sig = self.schedule.sigma(s)
            return -0.5 * np.asarray(sig) ** 2 * x
        return np.zeros_like(x)

    def diffusion_coeff(self, t):
        """g(t): sqrt(d[sigma^2]/dt) for VE/GBM, sigma(t) for VP.

        The VE rate is taken in process time, so for horizon T the
        schedule-time derivative is divided by T (a no-op at T = 1).
        """
        s = self._frac(t)
        if self.kind is ProcessKind.VP:
            return self.schedule.sigma(s)
        return np.sqrt(self.schedule.sigma_sq_rate(s) / self.horizon)

    # -- analytic transition kernel -------------------------------------

    def marginal_coeffs(self, t):
        """(scale, std) such that x_t = scale * x_0 + std * eps.

        Vectorized over t; each entry must be strictly positive in time.
        """
        s = self._frac(t)
        if np.any(np.asarray(s) <= 0.0):
            raise ValueError("transition kernel requires t > 0")
        if self.kind is ProcessKind.VP:
            alpha = np.exp(-self.schedule.sigma_sq_integral(s) * self.horizon)
            return np.sqrt(alpha), np.sqrt(1.0 - alpha)
        sig = self.schedule.sigma(s)
        one = np.ones_like(np.asarray(sig, dtype=float))
        return (float(one) if np.isscalar(sig) else one), sig

    def transition(self, x0, t):
        """Gaussian law of x_t given x_0, for scalar t in (0, T]."""
        scale, std = self.marginal_coeffs(t)
        mean = float(scale) * np.asarray(x0, dtype=float)
        return GaussianKernel(mean=mean, std=float(std))

    def forward_sample(self, x0, t, noise):
        """Reparameterized draw x_t = mean + std * noise."""
        x0 = np.asarray(x0, dtype=float)
        noise = np.asarray(noise, dtype=float)
        if noise.shape != x0.shape:
            raise ValueError(
                f"noise shape {noise.shape} must match state shape {x0.shape}"
            )
        k = self.transition(x0, t)
        return k.mean + k.std * noise

    def score_target(self, x0, xt, t):
        """Conditional score grad_{x_t} log p_{t|0}(x_t | x_0) = -(x_t - mean)/std^2."""
        k = self.transition(x0, t)
        return -(np.asarray(xt, dtype=float) - k.mean) / (k.std * k.std)

    # -- numerical integration ------------------------------------------

    def em_forward_path(self, x0, n_steps, rng):
        """Euler-Maruyama integration of the forward SDE from 0 to T.

        Returns an array of shape (n_steps + 1, *x0.shape) including the
        initial state. Under the VE convention sigma(t) is the marginal
        std, so the time-0 state of VE/GBM already carries sigma_min of
        noise; the path injects that floor before stepping, which keeps
        the simulation consistent with the analytic kernel at every t.
        Validation-only: the analytic kernel is exact, so use
        `forward_sample` for anything but cross-checks.
        """
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        x0 = np.asarray(x0, dtype=float)
        dt = self.horizon / n_steps
        path = np.empty((n_steps + 1,) + x0.shape)
        x = x0.copy()
        if self.kind is not ProcessKind.VP:
            x = x + self.schedule.sigma_min * rng.standard_normal(x.shape)
        path[0] = x
        sqrt_dt = np.sqrt(dt)
        for k in range(n_steps):
            t = k * dt
            g = self.diffusion_coeff(t)
            x = x + self.drift(x, t) * dt + g * sqrt_dt * rng.standard_normal(x.shape)
            path[k + 1] = x
        return path

    def reverse_step(self, x, t, dt, score, noise):
        """One Euler-Maruyama step of the reverse-time SDE, from t to t - dt."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if t - dt < EPS_T - 1e-12:
            raise ValueError(
                f"reverse step from t={t} with dt={dt} crosses the floor {EPS_T}"
            )
        x = np.asarray(x, dtype=float)
        score = np.asarray(score, dtype=float)
        noise = np.asarray(noise, dtype=float)
        g = float(self.diffusion_coeff(t))
        drift_term = self.drift(x, t) - g * g * score
        return x - drift_term * dt + g * np.sqrt(dt) * noise


def to_log_space(prices):
    """Elementwise log of a strictly positive price vector."""
    prices = np.asarray(prices, dtype=float)
    if np.any(prices <= 0.0) or not np.all(np.isfinite(prices)):
        raise DataError("prices must be finite and strictly positive")
    return np.log(prices)


def to_price_space(logp, anchor):
    """Map a log-space series back to prices, re-anchored at `anchor`.

    The first element of the result equals `anchor` exactly.
    """
    if not anchor > 0.0:
        raise DataError(f"anchor price must be positive, got {anchor}")
    logp = np.asarray(logp, dtype=float)
    return anchor * np.exp(logp - logp[..., :1])
