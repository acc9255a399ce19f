"""Closed forms for the uniform factor under the entrance law on [0, 1].

Record times form a Poisson process with intensity dz/z. The threshold policy
stops at a record at time t carrying weight R as soon as (1 - t) R <= s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import DomainError, incomplete_gamma, integrate
from .stopping import solve_threshold
from .factor import Uniform

__all__ = ["WinRateCurve", "stop_time_density", "winning_rate", "win_rate_curve", "optimal_uniform_threshold", "integrated"]


@dataclass
class WinRateCurve:
    s: float
    t_grid: np.ndarray
    w_values: np.ndarray
    density_values: np.ndarray


def optimal_uniform_threshold() -> float:
    return solve_threshold(Uniform()).s_star


def _check(s: float, t: float):
    if not s > 0:
        raise DomainError("threshold must be positive")
    if not 0.0 <= t <= 1.0:
        raise DomainError("t must lie in [0, 1]")


def stop_time_density(s: float, t: float) -> float:
    """Density at t of the stopping time of pi_s; its total mass is P(pi_s stops).

    f(t) = (e^{-st} - e^{-st/(1-t)}) / t^2, with f(0) = s and f(1) = e^{-s}.
    """
    _check(s, t)
    if t == 0.0:
        return s
    if t == 1.0:
        return math.exp(-s)
    return -math.exp(-s * t) * math.expm1(-s * t * t / (1.0 - t)) / (t * t)


def winning_rate(s: float, t: float) -> float:
    """Density at t of the event "pi_s stops at t and t is the last record".

    -e^{-s} + (e^{-st} - e^{-st/(1-t)})/t + (e^{-st} - t e^{-s})/(1-t)
    + s/(1-t) [Gamma(0, s, s/(1-t)) - Gamma(0, st, st/(1-t))]
    """
    _check(s, t)
    if t == 0.0:
        return -math.expm1(-s)
    if t == 1.0:
        return math.exp(-s)
    u = 1.0 - t
    es = math.exp(-s)
    first = -math.exp(-s * t) * math.expm1(-s * t * t / u) / t
    second = es * (math.expm1(s * u) / u + 1.0)
    S = s / u
    q = dict(atol=0.0, rtol=1e-13)
    if t < 0.5:
        # both ranges [s, s/u] and [st, st/u] are x = a(1 + z), z in [0, t/u]
        bracket = integrate(
            lambda z: np.exp(-s * t * (1 + z)) * np.expm1(-s * u * (1 + z)) / (1 + z), 0.0, t / u, **q
        ).value
    else:
        # Gamma(0, s, S) - Gamma(0, st, St) = Gamma(0, St, S) - Gamma(0, st, s); the last
        # range is x = s(1 - z), z in [0, u], which keeps its width exact as t -> 1
        narrow = integrate(lambda z: np.exp(-s * (1 - z)) / (1 - z), 0.0, u, **q).value
        bracket = incomplete_gamma(0.0, S * t, S) - narrow
    return -es + first + second + S * bracket


def win_rate_curve(s: float | None = None, grid: int = 101) -> WinRateCurve:
    if grid < 2:
        raise ValueError("grid needs at least 2 points")
    if s is None:
        s = optimal_uniform_threshold()
    t = np.linspace(0.0, 1.0, grid)
    w = np.array([winning_rate(s, x) for x in t])
    f = np.array([stop_time_density(s, x) for x in t])
    return WinRateCurve(s, t, w, f)


def integrated(fn, s: float, *, rtol: float = 1e-10) -> float:
    """Integral over [0, 1] of ``fn(s, t)``."""
    vec = np.vectorize(lambda x: fn(s, float(x)))
    return integrate(vec, 0.0, 1.0, atol=1e-12, rtol=rtol).value
