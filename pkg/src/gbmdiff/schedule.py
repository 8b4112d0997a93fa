"""Noise-variance schedules and their calculus.

Three schedule shapes are supported, all interpolating between
``sigma_min`` at t=0 and ``sigma_max`` at t=1:

* linear:       sigma(t)^2 = sigma_min^2 + t (sigma_max^2 - sigma_min^2)
* exponential:  sigma(t)   = sigma_min (sigma_max / sigma_min)^t
* cosine:       sigma(t)   = sigma_min + (sigma_max - sigma_min) (1 - cos(pi t)) / 2

Besides sigma itself, forward/reverse diffusion needs d[sigma^2]/dt (the
squared diffusion coefficient of a variance-exploding SDE) and
int_0^t sigma(s)^2 ds (which drives the variance-preserving marginal).
All three quantities have closed forms here, including the cosine
integral, so every value is exact to floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["ScheduleKind", "NoiseSchedule"]


class ScheduleKind(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    COSINE = "cosine"


def _check_t(t):
    """Validate t in [0, 1]; returns (array, is_scalar)."""
    arr = np.asarray(t, dtype=float)
    if arr.size and (np.any(arr < 0.0) or np.any(arr > 1.0)):
        raise ValueError(f"schedule time must lie in [0, 1], got {t!r}")
    return arr, np.isscalar(t) or arr.ndim == 0


def _ret(value, scalar):
    return float(value) if scalar else value


@dataclass(frozen=True)
class NoiseSchedule:
    """A sigma(t) curve on t in [0, 1] with bounds 0 < sigma_min < sigma_max."""

    kind: ScheduleKind
    sigma_min: float = 0.01
    sigma_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise ValueError(
                f"need 0 < sigma_min < sigma_max, got "
                f"({self.sigma_min}, {self.sigma_max})"
            )

    def sigma(self, t):
        """Noise standard deviation sigma(t)."""
        tt, scalar = _check_t(t)
        lo, hi = self.sigma_min, self.sigma_max
        if self.kind is ScheduleKind.LINEAR:
            out = np.sqrt(lo * lo + tt * (hi * hi - lo * lo))
        elif self.kind is ScheduleKind.EXPONENTIAL:
            out = lo * (hi / lo) ** tt
        else:
            out = lo + (hi - lo) * (1.0 - np.cos(np.pi * tt)) / 2.0
        return _ret(out, scalar)

    def sigma_sq_rate(self, t):
        """d[sigma(t)^2]/dt, the squared VE diffusion coefficient."""
        tt, scalar = _check_t(t)
        lo, hi = self.sigma_min, self.sigma_max
        if self.kind is ScheduleKind.LINEAR:
            out = np.full_like(tt, hi * hi - lo * lo)
        elif self.kind is ScheduleKind.EXPONENTIAL:
            sig = lo * (hi / lo) ** tt
            out = 2.0 * math.log(hi / lo) * sig * sig
        else:
            sig = lo + (hi - lo) * (1.0 - np.cos(np.pi * tt)) / 2.0
            out = sig * (hi - lo) * np.pi * np.sin(np.pi * tt)
        return _ret(out, scalar)

    def sigma_sq_integral(self, t):
        """int_0^t sigma(s)^2 ds, exact for all three kinds.

        Cosine case: with c = sigma_min + (sigma_max - sigma_min)/2 and
        d = (sigma_max - sigma_min)/2, sigma(s) = c - d cos(pi s), so

            int = c^2 t - (2 c d / pi) sin(pi t) + d^2 (t/2 + sin(2 pi t)/(4 pi)).
        """
        tt, scalar = _check_t(t)
        lo, hi = self.sigma_min, self.sigma_max
        if self.kind is ScheduleKind.LINEAR:
            out = lo * lo * tt + (hi * hi - lo * lo) * tt * tt / 2.0
        elif self.kind is ScheduleKind.EXPONENTIAL:
            c = math.log(hi / lo)
            out = lo * lo * (np.exp(2.0 * c * tt) - 1.0) / (2.0 * c)
        else:
            c = lo + (hi - lo) / 2.0
            d = (hi - lo) / 2.0
            out = (
                c * c * tt
                - (2.0 * c * d / np.pi) * np.sin(np.pi * tt)
                + d * d * (tt / 2.0 + np.sin(2.0 * np.pi * tt) / (4.0 * np.pi))
            )
        return _ret(out, scalar)
