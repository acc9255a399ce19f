"""Monte Carlo engine for the record process and its relatives.

Replicates are grouped into fixed-size blocks; block ``b`` draws from
``RngStream(seed, b)``. Blocks are independent tasks, so a result depends on
the seed and the replicate count only, never on how many workers ran it.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels
from ._backend import compiled_kernels, get_kernels
from .factor import Delta, FactorDistribution, RngStream
from .special import DomainError
from .stopping import BThreshold, Policy, TimeThreshold, WeightThreshold

__all__ = [
    "SimPath",
    "SimConfig",
    "SimReport",
    "RunawayPath",
    "Cube",
    "Interval",
    "simulate_path",
    "evaluate_policy",
    "simulate_entrance",
    "entrance_sample",
    "entrance_last_record_times",
    "evaluate_discrete",
    "sample_chain_records",
    "chain_record_ratios",
    "default_workers",
]

BLOCK = 8192
MAX_RECORDS = _pykernels.MAX_RECORDS
ENTRANCE_R0 = 1e8

_RUNAWAY = (_pykernels.RunawayPath,) + ((compiled_kernels.RunawayPath,) if compiled_kernels else ())


class RunawayPath(RuntimeError):
    """A path produced more than 1e7 records before the horizon."""


@dataclass
class SimPath:
    record_times: np.ndarray
    record_weights: np.ndarray
    horizon: float
    initial_state: float

    def __len__(self):
        return len(self.record_times)


@dataclass(frozen=True)
class SimConfig:
    dist: FactorDistribution
    r0: float
    horizon: float
    replicates: int
    seed: int = 0

    def __post_init__(self):
        if not (self.r0 > 0 and self.horizon > 0):
            raise ValueError("r0 and horizon must be positive")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimReport:
    estimate: float
    stderr: float
    replicates: int
    seed: int
    non_stop_fraction: float
    extra: dict = field(default_factory=dict, compare=False)


def default_workers() -> int:
    raw = os.environ.get("LAST_RECORD_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _report(successes: int, nonstops: int, n: int, seed: int) -> SimReport:
    p = successes / n
    return SimReport(p, math.sqrt(p * (1.0 - p) / n), n, seed, nonstops / n)


def _run_blocks(task, n: int, workers: int | None):
    """Apply ``task(block_index, size)`` to every block and return the results in block order."""
    sizes = [min(BLOCK, n - b * BLOCK) for b in range(-(-n // BLOCK))]
    workers = default_workers() if workers is None else max(1, int(workers))
    try:
        if workers == 1 or len(sizes) == 1:
            return [task(b, m) for b, m in enumerate(sizes)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, range(len(sizes)), sizes))
    except _RUNAWAY as exc:
        raise RunawayPath(str(exc)) from None


def _has_kernel(dist: FactorDistribution) -> bool:
    return dist.kernel_code is not None


# --- single paths ------------------------------------------------------------------

def simulate_path(config: SimConfig, rng: RngStream) -> SimPath:
    """Records of one path of R started at r0, strictly before the horizon."""
    r, t = config.r0, 0.0
    times, weights = [], []
    while True:
        t += rng.exponential() / r
        if t >= config.horizon:
            break
        r *= config.dist.sample(rng)
        times.append(t)
        weights.append(r)
        if len(times) > MAX_RECORDS:
            raise RunawayPath("more than 1e7 records on one path")
    return SimPath(np.array(times), np.array(weights), config.horizon, config.r0)


def simulate_entrance(dist: FactorDistribution, r0_large: float, rng: RngStream) -> SimPath:
    """Approximate draw from the entrance law on [0, 1] by starting at a huge state."""
    _check_entrance(dist)
    if r0_large < 1e6:
        raise DomainError("the large-state approximation needs r0 >= 1e6")
    return simulate_path(SimConfig(dist, r0_large, 1.0, 1), rng)


def _check_entrance(dist: FactorDistribution):
    if dist.lattice:
        raise DomainError(f"{dist.description} is supported by a geometric progression; no entrance law")


# --- policy evaluation ----------------------------------------------------------------

def _policy_code(policy: Policy) -> tuple[int, float]:
    if isinstance(policy, BThreshold):
        return _pykernels.POLICY_B, policy.s
    if isinstance(policy, WeightThreshold):
        return _pykernels.POLICY_WEIGHT, policy.w
    if isinstance(policy, TimeThreshold):
        return _pykernels.POLICY_TIME, policy.t0
    raise TypeError(f"unsupported policy {policy!r}")


def _generic_policy(rng, dist, r0, horizon, code, param, n):
    successes = nonstops = 0
    for _ in range(n):
        r, t, records = r0, 0.0, 0
        while True:
            t += rng.exponential() / r
            if t >= horizon:
                nonstops += 1
                break
            r *= dist.sample(rng)
            records += 1
            if records > MAX_RECORDS:
                raise _pykernels.RunawayPath("more than 1e7 records on one path")
            if code == _pykernels.POLICY_B:
                stop = (horizon - t) * r <= param
            elif code == _pykernels.POLICY_WEIGHT:
                stop = r <= param
            else:
                stop = t > param
            if stop:
                successes += t + rng.exponential() / r >= horizon
                break
    return successes, nonstops


def evaluate_policy(
    config: SimConfig, policy: Policy, workers: int | None = None, *, backend: str | None = None
) -> SimReport:
    """Success probability of ``policy``: it stops at a record and no later record precedes the horizon."""
    code, param = _policy_code(policy)
    dist = config.dist
    if _has_kernel(dist):
        kern = get_kernels(backend)
        kind, kparam = dist.kernel_code, dist.kernel_params[0]

        def task(b, m):
            rng = RngStream(config.seed, b)
            return kern.simulate_policy(rng, kind, kparam, config.r0, config.horizon, code, param, m)

    else:

        def task(b, m):
            rng = RngStream(config.seed, b)
            return _generic_policy(rng, dist, config.r0, config.horizon, code, param, m)

    parts = _run_blocks(task, config.replicates, workers)
    succ = sum(p[0] for p in parts)
    nons = sum(p[1] for p in parts)
    return _report(succ, nons, config.replicates, config.seed)


# --- entrance law ------------------------------------------------------------------------

def entrance_sample(
    dist: FactorDistribution,
    paths: int,
    seed: int = 0,
    *,
    r0: float = ENTRANCE_R0,
    workers: int | None = None,
    backend: str | None = None,
):
    """(state at time 1, last record time, record count) for ``paths`` large-state paths."""
    _check_entrance(dist)
    if _has_kernel(dist):
        kern = get_kernels(backend)
        kind, kparam = dist.kernel_code, dist.kernel_params[0]

        def task(b, m):
            return kern.entrance_paths(RngStream(seed, b), kind, kparam, r0, 1.0, m)

    else:

        def task(b, m):
            rng = RngStream(seed, b)
            out = [simulate_path(SimConfig(dist, r0, 1.0, 1), rng) for _ in range(m)]
            final = np.array([p.record_weights[-1] if len(p) else r0 for p in out])
            last = np.array([p.record_times[-1] if len(p) else 0.0 for p in out])
            return final, last, np.array([len(p) for p in out], dtype=np.int64)

    parts = _run_blocks(task, paths, workers)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def entrance_last_record_times(dist: FactorDistribution, paths: int = 100_000, seed: int = 0, **kw) -> np.ndarray:
    return entrance_sample(dist, paths, seed, **kw)[1]


# --- discrete-time variant -------------------------------------------------------------------

def _generic_discrete(rng, dist, n_obs, s, n):
    successes = nonstops = 0
    for _ in range(n):
        j = 1.0
        r = dist.sample(rng)
        while True:
            if r * (n_obs - j) <= s:
                g = 1.0 + math.floor(math.log1p(-rng.random()) / math.log1p(-r))
                successes += j + g > n_obs
                break
            j += 1.0 + math.floor(math.log1p(-rng.random()) / math.log1p(-r))
            if j > n_obs:
                nonstops += 1
                break
            r *= dist.sample(rng)
    return successes, nonstops


def evaluate_discrete(
    dist: FactorDistribution,
    n: int,
    policy_s: float,
    replicates: int,
    seed: int = 0,
    *,
    workers: int | None = None,
    backend: str | None = None,
) -> SimReport:
    """Index policy "stop at a record at index j with weight r once r (n - j) <= s".

    A record of weight r lasts a geometric number of observations with
    parameter r; success means the stop is at the last record among n.
    """
    if n < 1 or replicates < 1:
        raise ValueError("n and replicates must be at least 1")
    if not policy_s > 0:
        raise ValueError("policy threshold must be positive")
    if isinstance(dist, Delta) and dist.x == 1.0 or (
        hasattr(dist, "atoms") and np.any(dist.atoms()[0] == 1.0)
    ):
        raise DomainError("record weights must stay below 1 for geometric durations")
    if _has_kernel(dist):
        kern = get_kernels(backend)
        kind, kparam = dist.kernel_code, dist.kernel_params[0]

        def task(b, m):
            return kern.simulate_discrete(RngStream(seed, b), kind, kparam, float(n), policy_s, m)

    else:

        def task(b, m):
            return _generic_discrete(RngStream(seed, b), dist, float(n), policy_s, m)

    parts = _run_blocks(task, replicates, workers)
    return _report(sum(p[0] for p in parts), sum(p[1] for p in parts), replicates, seed)


# --- chain records -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Cube:
    """Unit cube [0,1]^d with coordinatewise order and Lebesgue measure."""

    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")


@dataclass(frozen=True)
class Interval:
    """Subintervals of [0, 1] ordered by inclusion; an interval of length L has lower-section mass L**alpha."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")


def sample_chain_records(space, n_samples: float, rng: RngStream, skip: bool = True, *, backend=None) -> np.ndarray:
    """Weights of successive chain records among ``n_samples`` i.i.d. marks.

    ``skip=False`` scans every mark with the greedy rule. ``skip=True`` draws
    the same process without visiting rejected marks: given the current chain
    record of weight w, the number of marks until the next one is geometric
    with parameter w and that mark is uniform on the lower section. The skip
    version accepts astronomically large ``n_samples``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    kern = get_kernels(backend)
    if isinstance(space, Cube):
        return kern.chain_records_cube(rng, int(space.d), float(n_samples), bool(skip))
    if isinstance(space, Interval):
        return kern.chain_records_interval(rng, float(space.alpha), float(n_samples), bool(skip))
    raise TypeError(f"unknown mark space {space!r}")


def chain_record_ratios(weights: np.ndarray) -> np.ndarray:
    """Successive ratios, the first taken against the whole space (weight 1)."""
    w = np.asarray(weights, dtype=float)
    return w / np.concatenate([[1.0], w[:-1]])
