"""Pure-Python kernels; reference for the compiled ``_kernels`` extension.

Every routine consumes uniforms from ``rng.generator.random()`` in the same
order as the compiled version and uses the same libm calls, so on one
platform both produce identical numbers.
"""
from __future__ import annotations

import math

import numpy as np

from .factor import KIND_BETA, KIND_DELTA, KIND_GEOM, KIND_INTERVAL, KIND_PRODUNIF

MAX_RECORDS = 10_000_000
TINY = 2.2250738585072014e-308  # smallest normal double
LOG_TINY = math.log(TINY)
POLICY_B, POLICY_WEIGHT, POLICY_TIME = range(3)

BACKEND = "python"


class RunawayPath(RuntimeError):
    pass


def _factor_sampler(kind: int, param: float, uniform):
    if kind == KIND_DELTA:
        return lambda: param
    if kind == KIND_BETA:
        if param == 1.0:
            return lambda: 1.0 - uniform()
        inv = 1.0 / param
        return lambda: (1.0 - uniform()) ** inv
    if kind == KIND_PRODUNIF:
        d = int(param)

        def draw():
            x = 1.0
            for _ in range(d):
                x *= 1.0 - uniform()
            return x

        return draw
    if kind == KIND_INTERVAL:
        alpha = param
        am1 = alpha - 1.0

        def draw():
            # same log-scale bisection as factor.interval_inverse_cdf
            v = 1.0 - uniform()
            lo = math.log(v / alpha) / am1
            hi = math.log(v) / am1
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                f = alpha * math.exp(am1 * mid) - am1 * math.exp(alpha * mid)
                if f < v:
                    lo = mid
                else:
                    hi = mid
            t = alpha * (0.5 * (lo + hi))
            return math.exp(t) if t > LOG_TINY else TINY

        return draw
    if kind == KIND_GEOM:
        q = 1.0 - param
        lq = math.log(q)

        def draw():
            k = 1.0 + math.floor(math.log1p(-uniform()) / lq)
            return q**k

        return draw
    raise ValueError(f"no kernel for distribution kind {kind}")


def simulate_policy(rng, kind, param, r0, horizon, policy, policy_param, n):
    """Run n replicates of the continuous-time record process; count successes and non-stops."""
    uniform = rng.generator.random
    factor = _factor_sampler(kind, param, uniform)
    successes = 0
    nonstops = 0
    for _ in range(n):
        r = r0
        t = 0.0
        records = 0
        while True:
            t += -math.log1p(-uniform()) / r
            if t >= horizon:
                nonstops += 1
                break
            r *= factor()
            records += 1
            if records > MAX_RECORDS:
                raise RunawayPath("more than 1e7 records on one path")
            if policy == POLICY_B:
                stop = (horizon - t) * r <= policy_param
            elif policy == POLICY_WEIGHT:
                stop = r <= policy_param
            else:
                stop = t > policy_param
            if stop:
                if t + -math.log1p(-uniform()) / r >= horizon:
                    successes += 1
                break
    return successes, nonstops


def entrance_paths(rng, kind, param, r0, horizon, n):
    """State at the horizon, last record time (0 if none) and record count per path."""
    uniform = rng.generator.random
    factor = _factor_sampler(kind, param, uniform)
    final = np.empty(n)
    last = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = r0
        t = 0.0
        k = 0
        tl = 0.0
        while True:
            t += -math.log1p(-uniform()) / r
            if t >= horizon:
                break
            r *= factor()
            tl = t
            k += 1
            if k > MAX_RECORDS:
                raise RunawayPath("more than 1e7 records on one path")
        final[i] = r
        last[i] = tl
        counts[i] = k
    return final, last, counts


def simulate_discrete(rng, kind, param, n_obs, s, n):
    """Index policy r (n - j) <= s for records with geometric durations."""
    uniform = rng.generator.random
    factor = _factor_sampler(kind, param, uniform)
    successes = 0
    nonstops = 0
    for _ in range(n):
        j = 1.0
        r = factor()
        while True:
            if r * (n_obs - j) <= s:
                g = 1.0 + math.floor(math.log1p(-uniform()) / math.log1p(-r))
                if j + g > n_obs:
                    successes += 1
                break
            j += 1.0 + math.floor(math.log1p(-uniform()) / math.log1p(-r))
            if j > n_obs:
                nonstops += 1
                break
            r *= factor()
    return successes, nonstops


def chain_records_cube(rng, d, n_samples, skip):
    """Weights of chain records among n_samples uniform marks in [0,1]^d."""
    uniform = rng.generator.random
    weights = []
    if skip:
        box = [1.0] * d
        w = 1.0
        used = 0.0
        while True:
            if w < 1.0:
                used += 1.0 + math.floor(math.log1p(-uniform()) / math.log1p(-w))
            else:
                used += 1.0
            if used > n_samples:
                break
            w = 1.0
            for c in range(d):
                box[c] *= uniform()
                w *= box[c]
            weights.append(w)
        return np.array(weights)
    cur = None
    for _ in range(int(n_samples)):
        v = [uniform() for _ in range(d)]
        if cur is None or all(a < b for a, b in zip(v, cur)):
            cur = v
            w = 1.0
            for a in v:
                w *= a
            weights.append(w)
    return np.array(weights)


def _interval_mark(uniform, alpha):
    # length ~ Beta(alpha-1, 2) as a product of Beta(alpha-1,1) and Beta(alpha,1)
    length = uniform() ** (1.0 / (alpha - 1.0)) * uniform() ** (1.0 / alpha)
    left = uniform() * (1.0 - length)
    return left, length


def chain_records_interval(rng, alpha, n_samples, skip):
    """Weights mu(L_v) = length**alpha of chain records in the interval space."""
    uniform = rng.generator.random
    weights = []
    if skip:
        a, ln = 0.0, 1.0
        w = 1.0
        used = 0.0
        while True:
            if w < 1.0:
                used += 1.0 + math.floor(math.log1p(-uniform()) / math.log1p(-w))
            else:
                used += 1.0
            if used > n_samples:
                break
            left, length = _interval_mark(uniform, alpha)
            a = a + left * ln
            ln = length * ln
            w = ln**alpha
            weights.append(w)
        return np.array(weights)
    cur = None
    for _ in range(int(n_samples)):
        left, length = _interval_mark(uniform, alpha)
        if cur is None or (left > cur[0] and left + length < cur[0] + cur[1]):
            cur = (left, length)
            weights.append(length**alpha)
    return np.array(weights)


def _density(kind, param):
    if kind == KIND_BETA:
        return lambda x: param * x ** (param - 1.0)
    if kind == KIND_PRODUNIF:
        k = int(param) - 1
        norm = math.factorial(k)
        return lambda x: (-np.log(x)) ** k / norm
    if kind == KIND_INTERVAL:
        return lambda x: (param - 1.0) * (x ** (-1.0 / param) - 1.0)
    raise ValueError(f"no density kernel for kind {kind}")


def march_trapezoid_pdf(pdf, T, F, v0, f0):
    """Implicit trapezoid march of v' = -v + (1/T) int_s^T v(u) pdf(u/T) du + F(T).

    ``T`` is an equispaced grid starting at the threshold s; the history
    integral uses the trapezoid rule on the same nodes.
    """
    T = np.asarray(T, dtype=float)
    F = np.asarray(F, dtype=float)
    n_nodes = T.size
    h = T[1] - T[0]
    v = np.empty(n_nodes)
    v[0] = v0
    f_prev = f0
    for n in range(1, n_nodes):
        tn = T[n]
        phi = pdf(T[: n + 1] / tn)
        rest = (h / tn) * (0.5 * v[0] * phi[0] + np.dot(v[1:n], phi[1:n]))
        c = 0.5 * (h / tn) * phi[n]
        vn = (v[n - 1] + 0.5 * h * (f_prev + rest + F[n])) / (1.0 + 0.5 * h * (1.0 - c))
        v[n] = vn
        f_prev = -vn + c * vn + rest + F[n]
    return v


def march_trapezoid(kind, param, T, F, v0, f0):
    return march_trapezoid_pdf(_density(kind, param), T, F, v0, f0)
