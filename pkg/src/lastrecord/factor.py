"""Laws of the stick-breaking factor X on (0, 1].

Every distribution exposes sampling, the truncated expectation functional
``expect(g, lo, hi) = E[g(X) 1(lo <= X <= hi)]``, the CDF, the Mellin
transform ``E[X**lam]`` and ``E|log X|``. Continuous laws with endpoint
singularities integrate in a substituted variable chosen per family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .special import DomainError, QuadratureError, integrate

__all__ = [
    "RngStream",
    "FactorDistribution",
    "Beta",
    "Uniform",
    "Delta",
    "ProductOfUniforms",
    "IntervalSpace",
    "GeometricAtoms",
    "ContinuousFactor",
    "AtomicFactor",
    "DistSpecError",
    "parse_dist",
    "sample",
    "expect",
    "mellin",
    "mean_abs_log",
    "lower_homogeneity_check",
    "DIST_SPECS",
]

# kernel codes shared with the compiled and pure-Python simulation kernels
KIND_DELTA, KIND_BETA, KIND_PRODUNIF, KIND_INTERVAL, KIND_GEOM = range(5)

_TAIL = 1e-14
_TINY = np.finfo(float).tiny
_LOG_TINY = math.log(_TINY)
_QUAD = dict(atol=1e-13, rtol=1e-11)


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's PCG64 seeded from ``SeedSequence(seed, spawn_key=(stream_id,))``,
    so distinct stream ids give independent streams.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.bit_generator = np.random.PCG64(ss)
        self.generator = np.random.Generator(self.bit_generator)

    def random(self, size=None):
        return self.generator.random(size)

    def exponential(self, size=None):
        # -log(1-U) keeps the draw order identical to the simulation kernels
        u = self.generator.random(size)
        return -np.log1p(-u) if size is not None else -math.log1p(-u)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


class FactorDistribution:
    """Base class. Subclasses override the closed forms they have."""

    kernel_code: int | None = None
    discrete: bool = False
    #: law supported by a geometric progression (renewal theorem does not apply)
    lattice: bool = False

    @property
    def description(self) -> str:
        raise NotImplementedError

    @property
    def kernel_params(self) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: RngStream, size=None):
        u = rng.random(size)
        return self._from_uniform(np.asarray(u)) if size is not None else float(self._from_uniform(np.asarray(u)))

    def _from_uniform(self, u: np.ndarray) -> np.ndarray:
        # generic inverse CDF on a tabulated grid
        xs = np.linspace(0.0, 1.0, 4097)
        cs = np.maximum.accumulate(self.cdf(xs))
        return np.clip(np.interp(1.0 - u, cs, xs), np.finfo(float).tiny, 1.0)

    def expect(self, g: Callable[[np.ndarray], np.ndarray], lo: float = 0.0, hi: float = 1.0) -> float:
        raise NotImplementedError

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([self.expect(np.ones_like, 0.0, xi) if xi > 0 else 0.0 for xi in x.ravel()]).reshape(x.shape)

    def mellin(self, lam: float) -> float:
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        if lam == 0:
            return 1.0
        return self.expect(lambda x: x**lam)

    def mean_abs_log(self) -> float:
        try:
            return self.expect(lambda x: -np.log(x))
        except QuadratureError as exc:
            raise DomainError(f"E|log X| does not converge for {self.description}") from exc

    def __str__(self) -> str:
        return self.description


def _clip_unit(lo: float, hi: float) -> tuple[float, float]:
    return max(lo, 0.0), min(hi, 1.0)


@dataclass(frozen=True)
class Beta(FactorDistribution):
    """Density theta * x**(theta - 1); theta = 1 is the uniform law."""

    theta: float
    kernel_code = KIND_BETA

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError(f"beta parameter must be positive, got {self.theta}")

    @property
    def description(self) -> str:
        return "uniform" if self.theta == 1.0 else f"beta:{self.theta:g}"

    @property
    def kernel_params(self):
        return (float(self.theta), 0.0)

    def _from_uniform(self, u):
        return (1.0 - u) ** (1.0 / self.theta)

    def expect(self, g, lo=0.0, hi=1.0):
        lo, hi = _clip_unit(lo, hi)
        if hi <= lo:
            return 0.0
        inv = 1.0 / self.theta
        # x = u**(1/theta) turns the density into the unit weight
        return integrate(lambda u: g(np.maximum(u**inv, _TINY)), lo**self.theta, hi**self.theta, **_QUAD).value

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** self.theta

    def pdf(self, x):
        return self.theta * np.asarray(x, dtype=float) ** (self.theta - 1.0)

    def mellin(self, lam):
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        return self.theta / (self.theta + lam)

    def mean_abs_log(self):
        return 1.0 / self.theta


def Uniform() -> Beta:
    return Beta(1.0)


@dataclass(frozen=True)
class Delta(FactorDistribution):
    x: float
    kernel_code = KIND_DELTA
    discrete = True
    lattice = True

    def __post_init__(self):
        if not 0.0 < self.x <= 1.0:
            raise DomainError(f"delta atom must lie in (0, 1], got {self.x}")

    @property
    def description(self):
        return f"delta:{self.x:g}"

    @property
    def kernel_params(self):
        return (float(self.x), 0.0)

    def atoms(self):
        return np.array([self.x]), np.array([1.0])

    def _from_uniform(self, u):
        return np.full_like(u, self.x, dtype=float)

    def expect(self, g, lo=0.0, hi=1.0):
        if not lo <= self.x <= hi:
            return 0.0
        return float(np.asarray(g(np.array([self.x])))[0])

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.x).astype(float)

    def mellin(self, lam):
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        return self.x**lam

    def mean_abs_log(self):
        return -math.log(self.x)


@dataclass(frozen=True)
class ProductOfUniforms(FactorDistribution):
    """Product of d independent uniforms: density |log x|**(d-1) / (d-1)!."""

    d: int
    kernel_code = KIND_PRODUNIF

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")

    @property
    def description(self):
        return f"produnif:{self.d}"

    @property
    def kernel_params(self):
        return (float(self.d), 0.0)

    def _from_uniform(self, u):
        raise NotImplementedError  # needs d uniforms per draw

    def sample(self, rng, size=None):
        if size is None:
            return float(np.prod(1.0 - rng.random(self.d)))
        u = rng.random((*np.atleast_1d(size), self.d))
        return np.prod(1.0 - u, axis=-1)

    def expect(self, g, lo=0.0, hi=1.0):
        lo, hi = _clip_unit(lo, hi)
        if hi <= lo:
            return 0.0
        if self.d == 1:
            return integrate(g, lo, hi, **_QUAD).value
        k = self.d - 1
        norm = math.factorial(k)
        ulo = -math.log(hi)
        uhi = -math.log(lo) if lo > 0 else math.inf
        # x = e^{-u} removes the log singularity at 0
        def h(u):
            w = u**k * np.exp(-u) / norm
            x = np.maximum(np.exp(-u), _TINY)
            return np.where(w > 0, g(x) * w, 0.0)

        return integrate(h, ulo, uhi, **_QUAD).value

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = -np.log(x)
            total = np.zeros_like(x)
            term = np.ones_like(x)
            for j in range(self.d):
                if j:
                    term = term * lg / j
                total = total + term
            out = x * total
        return np.where(x > 0, out, 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(np.log(x)) ** (self.d - 1) / math.factorial(self.d - 1)

    def mellin(self, lam):
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        return (1.0 + lam) ** (-self.d)

    def mean_abs_log(self):
        return float(self.d)


@dataclass(frozen=True)
class IntervalSpace(FactorDistribution):
    """Factor law of the interval space: density (alpha-1)(x**(-1/alpha) - 1)."""

    alpha: float
    kernel_code = KIND_INTERVAL

    def __post_init__(self):
        if not self.alpha > 1:
            raise DomainError(f"interval-space parameter must exceed 1, got {self.alpha}")

    @property
    def description(self):
        return f"interval:{self.alpha:g}"

    @property
    def kernel_params(self):
        return (float(self.alpha), 0.0)

    def _from_uniform(self, u):
        return interval_inverse_cdf(self.alpha, 1.0 - np.asarray(u, dtype=float))

    def expect(self, g, lo=0.0, hi=1.0):
        lo, hi = _clip_unit(lo, hi)
        if hi <= lo:
            return 0.0
        a = self.alpha
        m = 2.0 * a / (a - 1.0)
        # x = u**m makes the transformed density m(a-1)(u - u**(m-1)) regular
        c = m * (a - 1.0)
        return integrate(
            lambda u: c * g(np.maximum(u**m, _TINY)) * (u - u ** (m - 1.0)), lo ** (1.0 / m), hi ** (1.0 / m), **_QUAD
        ).value

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        a = self.alpha
        return a * x ** ((a - 1.0) / a) - (a - 1.0) * x

    def pdf(self, x):
        a = self.alpha
        return (a - 1.0) * (np.asarray(x, dtype=float) ** (-1.0 / a) - 1.0)

    def mellin(self, lam):
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        a = self.alpha
        return (a - 1.0) * (1.0 / (lam + 1.0 - 1.0 / a) - 1.0 / (lam + 1.0))

    def mean_abs_log(self):
        a = self.alpha
        return (2.0 * a - 1.0) / (a - 1.0)


def interval_inverse_cdf(alpha: float, v):
    """Solve ``alpha y**(alpha-1) - (alpha-1) y**alpha = v`` and return x = y**alpha.

    Bisection runs on t = log y inside [log(v/alpha), log v] / (alpha - 1), a
    bracket of width log(alpha)/(alpha-1) <= 1, so 64 fixed halvings give y to
    full relative precision even when alpha is close to 1 and most of the mass
    sits at tiny x. Results below the smallest normal double are clamped to it.
    The simulation kernels repeat exactly these operations.
    """
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        lo = np.log(v / alpha) / (alpha - 1.0)
        hi = np.log(v) / (alpha - 1.0)
    zero = v <= 0.0
    lo = np.where(zero, -1.0, lo)
    hi = np.where(zero, 0.0, hi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        f = alpha * np.exp((alpha - 1.0) * mid) - (alpha - 1.0) * np.exp(alpha * mid)
        below = f < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = alpha * (0.5 * (lo + hi))
    return np.where(zero, 0.0, np.exp(np.maximum(t, _LOG_TINY)))


@dataclass(frozen=True)
class GeometricAtoms(FactorDistribution):
    """Masses p q**(k-1) at q**k, k = 1, 2, ... (strict records of a geometric sample)."""

    p: float
    kernel_code = KIND_GEOM
    discrete = True
    lattice = True

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"geometric parameter must lie in (0, 1), got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def description(self):
        return f"geomatoms:{self.p:g}"

    @property
    def kernel_params(self):
        return (float(self.p), 0.0)

    def atoms(self):
        q = self.q
        # tail mass beyond K is q**K
        n = max(1, math.ceil(math.log(_TAIL) / math.log(q)))
        k = np.arange(1, n + 1)
        return q**k, self.p * q ** (k - 1)

    def _from_uniform(self, u):
        k = 1.0 + np.floor(np.log1p(-np.asarray(u)) / math.log(self.q))
        return self.q**k

    def expect(self, g, lo=0.0, hi=1.0):
        vals, probs = self.atoms()
        keep = (vals >= lo) & (vals <= hi)
        if not keep.any():
            return 0.0
        return float(np.dot(np.asarray(g(vals[keep]), dtype=float), probs[keep]))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            # smallest k with q**k <= x, guarded against rounding at atoms
            k = np.ceil(np.log(x) / math.log(self.q) - 1e-9)
        k = np.maximum(k, 1.0)
        return np.where(x > 0, self.q ** (k - 1.0), 0.0)

    def mellin(self, lam):
        if lam < 0:
            raise DomainError("Mellin transform needs lam >= 0")
        q = self.q
        return self.p * q**lam / (1.0 - q ** (lam + 1.0))

    def mean_abs_log(self):
        return -math.log(self.q) / self.p


@dataclass(frozen=True)
class ContinuousFactor(FactorDistribution):
    """User-supplied density on (0, 1]; integrated directly, so it should be bounded."""

    density: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    @property
    def description(self):
        return self.name

    def expect(self, g, lo=0.0, hi=1.0):
        lo, hi = _clip_unit(lo, hi)
        if hi <= lo:
            return 0.0
        return integrate(lambda x: g(x) * self.density(x), lo, hi, **_QUAD).value

    def pdf(self, x):
        return self.density(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class AtomicFactor(FactorDistribution):
    """Finite list of atoms in (0, 1] with probabilities summing to one."""

    values: tuple
    probs: tuple
    name: str = field(default="atoms")
    discrete = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.size == 0:
            raise DomainError("atoms and probabilities must be non-empty and aligned")
        if np.any(v <= 0) or np.any(v > 1) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("atoms must lie in (0, 1] with probabilities summing to 1")

    @property
    def description(self):
        return self.name

    def atoms(self):
        return np.asarray(self.values, dtype=float), np.asarray(self.probs, dtype=float)

    def _from_uniform(self, u):
        v, p = self.atoms()
        idx = np.searchsorted(np.cumsum(p), u, side="right")
        return v[np.minimum(idx, v.size - 1)]

    def expect(self, g, lo=0.0, hi=1.0):
        v, p = self.atoms()
        keep = (v >= lo) & (v <= hi)
        if not keep.any():
            return 0.0
        return float(np.dot(np.asarray(g(v[keep]), dtype=float), p[keep]))

    def cdf(self, x):
        v, p = self.atoms()
        x = np.asarray(x, dtype=float)
        return (v[None, :] <= x.reshape(-1, 1)) @ p


DIST_SPECS = ("uniform", "beta:<theta>", "delta:<x>", "produnif:<d>", "interval:<alpha>", "geomatoms:<p>")


class DistSpecError(ValueError):
    pass


def parse_dist(spec: str) -> FactorDistribution:
    """Parse a textual specifier such as ``beta:0.5`` or ``produnif:2``."""
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name == "uniform" and not arg:
            return Uniform()
        if name == "beta":
            return Beta(float(arg))
        if name == "delta":
            return Delta(float(arg))
        if name == "produnif":
            return ProductOfUniforms(int(arg))
        if name == "interval":
            return IntervalSpace(float(arg))
        if name == "geomatoms":
            return GeometricAtoms(float(arg))
    except (ValueError, DomainError) as exc:
        raise DistSpecError(f"bad distribution spec {spec!r}: {exc}") from exc
    raise DistSpecError(f"unknown distribution spec {spec!r}; valid: {', '.join(DIST_SPECS)}")


def sample(dist: FactorDistribution, rng: RngStream) -> float:
    return dist.sample(rng)


def expect(dist: FactorDistribution, g, lo: float = 0.0, hi: float = 1.0) -> float:
    return dist.expect(g, lo, hi)


def mellin(dist: FactorDistribution, lam: float) -> float:
    return dist.mellin(lam)


def mean_abs_log(dist: FactorDistribution) -> float:
    return dist.mean_abs_log()


def lower_homogeneity_check(
    dist: FactorDistribution,
    grid: Sequence[float],
    *,
    empirical: bool = False,
    n: int = 100_000,
    rng: RngStream | None = None,
) -> bool:
    """True iff P(X <= x) >= x on the grid (analytic CDF, or empirical within 3 stderr)."""
    grid = np.asarray(grid, dtype=float)
    if empirical:
        rng = rng or RngStream(0)
        draws = np.sort(np.asarray(dist.sample(rng, n)))
        ecdf = np.searchsorted(draws, grid, side="right") / n
        slack = 3.0 * np.sqrt(np.maximum(grid * (1 - grid), 1.0 / n) / n)
        return bool(np.all(ecdf >= grid - slack))
    return bool(np.all(np.asarray(dist.cdf(grid)) >= grid - 1e-9))
