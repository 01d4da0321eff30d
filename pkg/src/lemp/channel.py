"""Return-stroke source: Heidler channel-base current and the MTLE model.

The channel-base current is the sum of two Heidler terms,

    I(0, t) = sum_i (I_i / xi_i) * x_i^n_i / (x_i^n_i + 1) * exp(-t / tau_i2),
    x_i = t / tau_i1,

and the MTLE model propagates it up the channel at the front speed while
decaying exponentially with height:

    i(z', t) = I(0, t - z'/v) * exp(-z'/lambda).

All functions accept scalars or numpy arrays and return float arrays; times
before the source onset give zero current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import C0


def heidler_correction(tau1: float, tau2: float, n: float) -> float:
    """Peak-normalization factor of one Heidler term.

    xi = exp(-(tau1/tau2) * (n * tau2/tau1) ** (1/n)), so that I/xi is close
    to the peak of that term.
    """
    if not (tau1 > 0 and tau2 > 0):
        raise ValueError(f"time constants must be positive, got tau1={tau1}, tau2={tau2}")
    if n < 1:
        raise ValueError(f"steepness exponent must be >= 1, got n={n}")
    return math.exp(-(tau1 / tau2) * (n * tau2 / tau1) ** (1.0 / n))


@dataclass(frozen=True)
class HeidlerParams:
    """Two-term Heidler channel-base current (amplitudes in A, times in s).

    Defaults are the typical subsequent return stroke used throughout the
    validation scenarios.
    """

    i1: float = 10.7e3
    tau11: float = 0.25e-6
    tau12: float = 2.5e-6
    n1: float = 2.0
    i2: float = 6.5e3
    tau21: float = 2.0e-6
    tau22: float = 230e-6
    n2: float = 2.0
    xi1: float = field(init=False, repr=False)
    xi2: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.i1 < 0 or self.i2 < 0:
            raise ValueError("current amplitudes must be >= 0")
        object.__setattr__(self, "xi1", heidler_correction(self.tau11, self.tau12, self.n1))
        object.__setattr__(self, "xi2", heidler_correction(self.tau21, self.tau22, self.n2))

    def scaled(self, k: float) -> "HeidlerParams":
        return replace(self, i1=self.i1 * k, i2=self.i2 * k)

    def terms(self):
        return ((self.i1 / self.xi1, self.tau11, self.tau12, self.n1),
                (self.i2 / self.xi2, self.tau21, self.tau22, self.n2))


@dataclass(frozen=True)
class MtleModel:
    """Modified transmission line model with exponential decay."""

    lambda_decay: float = 2000.0
    v_front: float = 1.5e8
    channel_height: float = 7500.0
    base: HeidlerParams = field(default_factory=HeidlerParams)

    def __post_init__(self):
        if not 0 < self.v_front < C0:
            raise ValueError(f"front speed must lie in (0, c0), got {self.v_front}")
        if self.lambda_decay <= 0:
            raise ValueError("lambda_decay must be positive")
        if self.channel_height <= 0:
            raise ValueError("channel_height must be positive")

    def scaled(self, k: float) -> "MtleModel":
        return replace(self, base=self.base.scaled(k))


def heidler_current(t, p: HeidlerParams) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    acc = np.zeros_like(tp)
    for amp, tau1, tau2, n in p.terms():
        xn = (tp / tau1) ** n
        acc += amp * xn / (xn + 1.0) * np.exp(-tp / tau2)
    out[pos] = acc
    return out


def heidler_derivative(t, p: HeidlerParams) -> np.ndarray:
    """Analytic dI(0,t)/dt in A/s."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    acc = np.zeros_like(tp)
    for amp, tau1, tau2, n in p.terms():
        x = tp / tau1
        xn = x ** n
        g = xn / (xn + 1.0)
        dg = n * x ** (n - 1.0) / (tau1 * (xn + 1.0) ** 2)
        acc += amp * np.exp(-tp / tau2) * (dg - g / tau2)
    out[pos] = acc
    return out


def sampled_derivative(values, dt: float) -> np.ndarray:
    """Centered finite difference of a uniformly sampled current."""
    return np.gradient(np.asarray(values, dtype=float), dt)


def _check_height(z, m: MtleModel):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > m.channel_height):
        raise ValueError(f"z' must lie in [0, {m.channel_height}] m")
    return z


def mtle_current(z_prime, t, m: MtleModel) -> np.ndarray:
    """Current at height z' and time t; zero before the front arrives."""
    z = _check_height(z_prime, m)
    z, t = np.broadcast_arrays(z, np.asarray(t, dtype=float))
    return heidler_current(t - z / m.v_front, m.base) * np.exp(-z / m.lambda_decay)


def mtle_derivative(z_prime, t, m: MtleModel) -> np.ndarray:
    z = _check_height(z_prime, m)
    z, t = np.broadcast_arrays(z, np.asarray(t, dtype=float))
    return heidler_derivative(t - z / m.v_front, m.base) * np.exp(-z / m.lambda_decay)
