"""Risk functions, the optimal threshold and the entrance-law moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .factor import Beta, Delta, FactorDistribution, RngStream
from .special import DomainError, find_root

__all__ = [
    "ThresholdResult",
    "Policy",
    "BThreshold",
    "WeightThreshold",
    "TimeThreshold",
    "parse_policy",
    "EntranceLaw",
    "Tau1Estimate",
    "p0",
    "p1",
    "threshold_residual",
    "solve_threshold",
    "embedded_step",
    "entrance_moments",
    "tau1_cdf",
]

_BRACKET = (1e-8, 1.0)


@dataclass(frozen=True)
class ThresholdResult:
    s_star: float
    residual: float
    bracket_width: float
    dist_description: str


@dataclass(frozen=True)
class Policy:
    """Stopping rule descriptor; see the three concrete kinds below."""

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class BThreshold(Policy):
    """Stop at the first record with (T - t) * R_t <= s."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("threshold must be positive")

    @property
    def spec(self):
        return f"bthresh:{self.s!r}"


@dataclass(frozen=True)
class WeightThreshold(Policy):
    """Stop at the first record whose weight is at most w."""

    w: float

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("weight threshold must be positive")

    @property
    def spec(self):
        return f"wthresh:{self.w!r}"


@dataclass(frozen=True)
class TimeThreshold(Policy):
    """Stop at the first record strictly after time t0."""

    t0: float

    def __post_init__(self):
        if not self.t0 >= 0:
            raise ValueError("time threshold must be non-negative")

    @property
    def spec(self):
        return f"tthresh:{self.t0!r}"


def parse_policy(spec: str, dist: FactorDistribution | None = None) -> Policy:
    name, _, arg = spec.strip().partition(":")
    if name == "optimal":
        if dist is None:
            raise ValueError("the optimal policy needs a distribution")
        return BThreshold(solve_threshold(dist).s_star)
    kinds = {"bthresh": BThreshold, "wthresh": WeightThreshold, "tthresh": TimeThreshold}
    if name not in kinds:
        raise ValueError(f"unknown policy {spec!r}; valid: bthresh:<s>, wthresh:<w>, tthresh:<t0>, optimal")
    return kinds[name](float(arg))


@dataclass(frozen=True)
class EntranceLaw:
    moments: tuple
    dist_description: str


@dataclass(frozen=True)
class Tau1Estimate:
    value: float
    method: str  # "closed_form" or "simulation"
    stderr: float = 0.0


def p0(s: float) -> float:
    if s < 0:
        raise DomainError("state must be non-negative")
    return math.exp(-s)


def _jump_kernel(s: float):
    """x -> (e^{s(1-x)} - 1) / (1 - x), extended by s at x = 1."""

    def h(x):
        y = 1.0 - np.asarray(x, dtype=float)
        out = np.full_like(y, s)
        np.divide(np.expm1(s * y), y, out=out, where=y > 0)
        return out

    return h


def _jump_expectation(dist: FactorDistribution, s: float) -> float:
    if s == 0.0:
        return 0.0
    return dist.expect(_jump_kernel(s))


def p1(dist: FactorDistribution, s: float) -> float:
    """Probability of exactly one further record from state s of the embedded chain."""
    if s < 0:
        raise DomainError("state must be non-negative")
    return math.exp(-s) * _jump_expectation(dist, s)


def threshold_residual(dist: FactorDistribution, s: float) -> float:
    return _jump_expectation(dist, s) - 1.0


def solve_threshold(dist: FactorDistribution) -> ThresholdResult:
    """Unique positive root of E[(e^{s(1-X)} - 1)/(1 - X)] = 1."""
    if isinstance(dist, Delta) and dist.x == 1.0:
        return ThresholdResult(1.0, 0.0, 0.0, dist.description)
    if isinstance(dist, Delta):
        # closed form: (e^{s(1-x)} - 1)/(1-x) = 1
        s = math.log(2.0 - dist.x) / (1.0 - dist.x)
        return ThresholdResult(s, threshold_residual(dist, s), 0.0, dist.description)
    lo, hi = _BRACKET
    xtol = 1e-12
    s = find_root(lambda v: threshold_residual(dist, v), lo, hi, xtol=xtol)
    return ThresholdResult(s, threshold_residual(dist, s), xtol, dist.description)


def embedded_step(s: float, dist: FactorDistribution, rng: RngStream) -> float:
    """One transition s -> (s - E)_+ X of the chain of record-time states."""
    if s < 0:
        raise DomainError("state must be non-negative")
    if s == 0.0:
        return 0.0
    e = rng.exponential()
    if e >= s:
        return 0.0
    return (s - e) * dist.sample(rng)


def entrance_moments(dist: FactorDistribution, K: int) -> EntranceLaw:
    """First K moments of the entrance variable Y from the Mellin transform of X."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if dist.lattice:
        raise DomainError(f"{dist.description} is supported by a geometric progression; no entrance law")
    if isinstance(dist, Beta):
        # j / (1 - f(j)) = theta + j: rising factorial, exact for integer theta
        moments = [dist.theta]
        for j in range(1, K):
            moments.append(moments[-1] * (dist.theta + j))
        return EntranceLaw(tuple(moments), dist.description)
    mu = dist.mean_abs_log()
    if not (mu > 0 and math.isfinite(mu)):
        raise DomainError(f"E|log X| = {mu} is not a finite positive number")
    moments = [1.0 / mu]
    for j in range(1, K):
        moments.append(moments[-1] * j / (1.0 - dist.mellin(float(j))))
    return EntranceLaw(tuple(moments), dist.description)


def tau1_cdf(
    entrance: EntranceLaw,
    dist: FactorDistribution,
    t: float,
    *,
    paths: int = 100_000,
    seed: int = 0,
) -> Tau1Estimate:
    """P(tau_1 < t) for the last record time tau_1 on [0, 1] under the entrance law.

    Closed form E[exp(-Y(1/t - 1))] = t**theta for the beta family (Y is gamma);
    other laws fall back to simulated entrance paths.
    """
    if not 0.0 < t <= 1.0:
        raise DomainError("t must lie in (0, 1]")
    if isinstance(dist, Beta):
        return Tau1Estimate(t**dist.theta, "closed_form")
    if dist.description != entrance.dist_description:
        raise ValueError("entrance law and distribution disagree")
    from .simulate import entrance_last_record_times

    times = entrance_last_record_times(dist, paths=paths, seed=seed)
    hit = float(np.mean(times < t))
    return Tau1Estimate(hit, "simulation", math.sqrt(hit * (1.0 - hit) / paths))
