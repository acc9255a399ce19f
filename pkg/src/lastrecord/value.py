"""Value v(T, s) of the threshold policy pi_s.

Three routes:

* ``value_beta``: closed form through the incomplete gamma function for
  beta(theta, 1) factors, including the infinite horizon;
* ``value_delta``: piecewise recursion for a one-point factor, exact sums of
  exponentials while they are well conditioned, Chebyshev collocation after;
* ``solve_delay_ode``: a marching integrator for the delay equation
  dv/dT = -v + E[v(TX) 1(TX > s)] + E[exp(-TX) 1(TX <= s)], v = p1 on [0, s].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._backend import get_kernels
from .factor import Beta, Delta, FactorDistribution
from .special import DomainError, incomplete_gamma
from .stopping import p1, solve_threshold

__all__ = [
    "ValueGrid",
    "ValueReport",
    "HorizonTooLarge",
    "beta_p1_derivatives",
    "value_beta",
    "value_delta",
    "solve_delay_ode",
    "policy_value",
    "optimal_value",
    "smooth_fit_residual",
]

MAX_PIECES = 200


class HorizonTooLarge(DomainError):
    pass


@dataclass
class ValueGrid:
    s: float
    T_grid: np.ndarray
    v_values: np.ndarray
    dist_description: str
    method: str
    refinement_error: float = 0.0
    _spline: CubicSpline | None = field(default=None, repr=False)

    def at(self, T):
        """Interpolated v(T, s); exact p1 values are kept below s."""
        T = np.asarray(T, dtype=float)
        if np.any(T < 0) or np.any(T > self.T_grid[-1] * (1 + 1e-12)):
            raise ValueError("horizon outside the tabulated range")
        if self._spline is None:
            above = self.T_grid >= self.s
            self._spline = CubicSpline(self.T_grid[above], self.v_values[above])
            below = ~above
            self._below = CubicSpline(
                np.append(self.T_grid[below], self.s), np.append(self.v_values[below], self.v_values[above][0])
            )
        out = np.where(T >= self.s, self._spline(np.maximum(T, self.s)), self._below(np.minimum(T, self.s)))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ValueReport:
    s: float
    T: float
    value: float
    method: str
    tail_bound: float | None = None


# --- beta factor: closed form -------------------------------------------------

def _beta_laplace(theta: float, s: float) -> float:
    """E[exp(-sX)] = theta s**(-theta) Gamma(theta, 0, s)."""
    if s == 0.0:
        return 1.0
    log_scale = -theta * math.log(s)
    if abs(log_scale) < 600:
        return theta * incomplete_gamma(theta, 0.0, s) * math.exp(log_scale)
    return Beta(theta).expect(lambda x: np.exp(-s * x))


def beta_p1_derivatives(theta: float, s: float) -> tuple[float, float, float]:
    """(p1, p1', p1'') at s for the beta(theta, 1) factor."""
    p = p1(Beta(theta), s)
    lap = _beta_laplace(theta, s)
    d1 = -p + lap
    # d/ds of theta s^-theta Gamma(theta,0,s) = -(theta/s) lap + theta e^-s / s
    d2 = -d1 - theta * lap / s + theta * math.exp(-s) / s
    return p, d1, d2


def _scaled_gamma_factor(theta: float, s: float, T: float) -> float:
    """e^s s^theta Gamma(1-theta, s, T), guarded against overflow of the two factors."""
    log_pref = s + theta * math.log(s)
    if abs(log_pref) < 600:
        return math.exp(log_pref) * incomplete_gamma(1.0 - theta, s, T)
    from .special import integrate

    # integral of exp(-(t - s)) (s/t)**theta over [s, T]
    return integrate(lambda t: np.exp(-(t - s) + theta * np.log(s / t)), s, T, atol=0.0, rtol=1e-12).value


def value_beta(theta: float, T: float, s: float) -> float:
    if not (theta > 0 and s > 0):
        raise DomainError("theta and s must be positive")
    if T < 0:
        raise DomainError("horizon must be non-negative")
    if T <= s:
        return p1(Beta(theta), T)
    _, d1, _ = beta_p1_derivatives(theta, s)
    return _scaled_gamma_factor(theta, s, T) * d1 + p1(Beta(theta), s)


def smooth_fit_residual(theta: float, s: float) -> float:
    """s p1''(s) + (s + theta) p1'(s); vanishes exactly at the optimal threshold."""
    if not (theta > 0 and s > 0):
        raise DomainError("theta and s must be positive")
    _, d1, d2 = beta_p1_derivatives(theta, s)
    return s * d2 + (s + theta) * d1


# --- one-point factor: piecewise exponentials ---------------------------------

_CHEB_N = 24  # Chebyshev-Lobatto nodes per sub-interval
_CHEB_SPAN = 8.0  # sub-interval length in T, keeps exp(-T) resolved to rounding
_COEF_LIMIT = 1e4  # sum |c_j| beyond which the exponential sum loses > 1e-12


def _cheb_nodes_and_matrix(n: int):
    """Lobatto nodes cos(pi i/(n-1)), from +1 down to -1, and the differentiation matrix."""
    i = np.arange(n)
    tau = np.cos(np.pi * i / (n - 1))
    w = np.where((i == 0) | (i == n - 1), 2.0, 1.0) * (-1.0) ** i
    diff = tau[:, None] - tau[None, :] + np.eye(n)
    D = (w[:, None] / w[None, :]) / diff
    D -= np.diag(D.sum(axis=1))
    return tau, D


def _delta_spectral(x, T, s, k0, prev):
    """Continue the one-point recursion from piece k0 with Chebyshev collocation.

    Piece k is [s/x^(k-1), s/x^k]; multiplying by x maps it, and each of its m
    equal sub-intervals, onto the previous piece, so the delayed term at a node
    is the previous piece's value at the same node. ``prev(T)`` evaluates the
    piece k0 - 1.
    """
    tau, D = _cheb_nodes_and_matrix(_CHEB_N)
    k_end = k0
    while T > s / x**k_end:
        k_end += 1
        if k_end > MAX_PIECES:
            raise HorizonTooLarge(f"horizon {T} needs more than {MAX_PIECES} pieces")
    m = max(1, math.ceil(s * (1.0 - x) / x**k_end / _CHEB_SPAN))
    frac = (np.arange(m)[:, None] + 0.5 * (tau[None, :] + 1.0)) / m  # shape (m, n)
    a, L = s / x ** (k0 - 2), s * (1.0 - x) / x ** (k0 - 1)
    prev_vals = np.array([[prev(a + L * f) for f in row] for row in frac])
    v0 = prev_vals[-1, 0]
    eye = np.eye(_CHEB_N)
    for k in range(k0, k_end + 1):
        L = s * (1.0 - x) / x**k
        c = 0.5 * L / m
        A = D + c * eye
        A[-1] = eye[-1]
        vals = np.empty_like(prev_vals)
        for j in range(m):
            rhs = c * prev_vals[j]
            rhs[-1] = v0
            vals[j] = np.linalg.solve(A, rhs)
            v0 = vals[j, 0]
        prev_vals = vals
    # barycentric interpolation inside the sub-interval holding T
    a, L = s / x ** (k_end - 1), s * (1.0 - x) / x**k_end
    pos = min(max((T - a) / L * m, 0.0), m)
    j = min(int(pos), m - 1)
    t = 2.0 * (pos - j) - 1.0
    hit = np.isclose(t, tau, rtol=0.0, atol=1e-15)
    if hit.any():
        return float(prev_vals[j][hit][0])
    w = np.where((np.arange(_CHEB_N) == 0) | (np.arange(_CHEB_N) == _CHEB_N - 1), 0.5, 1.0)
    w *= (-1.0) ** np.arange(_CHEB_N)
    q = w / (t - tau)
    return float(np.dot(q, prev_vals[j]) / q.sum())


def value_delta(x: float, T: float, s: float) -> float:
    """v(T, s) for X = x almost surely.

    On [0, s/x] the policy stops at the first record, so v = p1(T). Beyond that
    the solution on [s/x^(k-1), s/x^k] is a sum of exponentials exp(-x^j T),
    obtained from the previous piece by solving v' + v = v(xT). For x near 1
    the rates x^j crowd together and the coefficients grow; once their sum
    exceeds ``_COEF_LIMIT`` the remaining pieces are solved by Chebyshev
    collocation instead.
    """
    if not 0.0 < x <= 1.0:
        raise DomainError("atom must lie in (0, 1]")
    if s <= 0 or T < 0:
        raise DomainError("need s > 0 and T >= 0")
    if x == 1.0:
        m = min(T, s)
        return m * math.exp(-m)
    if T <= s / x:
        return math.exp(-T) * math.expm1(T * (1.0 - x)) / (1.0 - x)
    # terms c_j exp(-lam_j (T - ref)) relative to the left end of the piece
    lam = np.array([x, 1.0])
    coef = np.array([math.exp(-x * s), -math.exp(-s)]) / (1.0 - x)
    ref = s
    k = 1
    while True:
        k += 1
        if k > MAX_PIECES:
            raise HorizonTooLarge(f"horizon {T} needs more than {MAX_PIECES} pieces")
        start = s / x ** (k - 1)
        end = s / x**k
        v_start = float(np.dot(coef, np.exp(-lam * (start - ref))))
        lam_new = lam * x
        coef_new = coef / (1.0 - lam_new)
        if np.abs(coef_new).sum() > _COEF_LIMIT:
            c_prev, l_prev, r_prev = coef, lam, ref
            return _delta_spectral(
                x, T, s, k, lambda u: float(np.dot(c_prev, np.exp(-l_prev * (u - r_prev))))
            )
        hom = v_start - coef_new.sum()
        lam = np.append(lam_new, 1.0)
        coef = np.append(coef_new, hom)
        ref = start
        if T <= end:
            return float(np.dot(coef, np.exp(-lam * (T - ref))))


# --- general factor: delay ODE --------------------------------------------------

def _forcing(dist: FactorDistribution, s: float, T: np.ndarray) -> np.ndarray:
    """E[exp(-T X) 1(T X <= s)] on a grid of horizons T >= s."""
    if isinstance(dist, Beta):
        th = dist.theta
        return th * incomplete_gamma(th, 0.0, s) * T ** (-th)
    return np.array([dist.expect(lambda x, t=t: np.exp(-t * x), 0.0, s / t) for t in T])


def _march_continuous(dist, s, T, F, v0, f0, backend):
    kern = get_kernels(backend)
    if dist.kernel_code is not None and not dist.discrete:
        lo, _ = dist.kernel_params
        return kern.march_trapezoid(dist.kernel_code, lo, T, F, v0, f0)
    from ._pykernels import march_trapezoid_pdf

    return march_trapezoid_pdf(dist.pdf, T, F, v0, f0)


def _continuous_grid(dist, s, T_max, grid_step, tol, max_levels, backend):
    n0 = max(2, math.ceil((T_max - s) / grid_step))
    v0 = p1(dist, s)
    f0 = -v0 + dist.expect(lambda x: np.exp(-s * x))
    levels = []  # Romberg table rows restricted to the coarse nodes
    err = math.inf
    for lev in range(max_levels):
        n = n0 * 2**lev
        T = np.linspace(s, T_max, n + 1)
        F = _forcing(dist, s, T)
        v = _march_continuous(dist, s, T, F, v0, f0, backend)[:: 2**lev]
        row = [v]
        for m, prev in enumerate(levels[-1] if levels else [], start=1):
            row.append(row[m - 1] + (row[m - 1] - prev) / (4**m - 1))
        levels.append(row)
        if lev >= 2:
            err = float(np.max(np.abs(row[-1] - levels[-2][-1])))
            if err < tol:
                break
    return np.linspace(s, T_max, n0 + 1), levels[-1][-1], err


def _atom_breakpoints(values, probs, s, T_max, cap=20000):
    xs = values[(values < 1.0) & (probs > 0)]
    points = {s}
    frontier = [s]
    while frontier and len(points) < cap:
        nxt = []
        for b in frontier:
            for xk in xs:
                c = b / xk
                if c < T_max and c not in points:
                    points.add(c)
                    nxt.append(c)
        frontier = nxt
    pts = np.array(sorted(points))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * pts[1:]])
    return pts[keep]


def _atomic_march(dist, s, T_max, h, refine=1):
    values, probs = dist.atoms()
    at_one = probs[values == 1.0].sum()
    inner = values < 1.0
    xs, ps = values[inner], probs[inner]
    if xs.size:
        h = min(h, 0.5 * s * (1.0 - xs.max()))
    bps = np.append(_atom_breakpoints(values, probs, s, T_max), T_max)
    T = [s]
    for a, b in zip(bps[:-1], bps[1:]):
        m = max(1, math.ceil((b - a) / h)) * refine
        T.extend(np.linspace(a, b, m + 1)[1:])
    T = np.array(T)
    v = np.empty(T.size)
    fa = np.empty(T.size)  # derivative at the left end of each step
    fb = np.empty(T.size)  # derivative at the right end of each step
    v[0] = p1(dist, s)

    def history(u, n):
        # cubic Hermite on the steps completed so far
        i = np.clip(np.searchsorted(T[: n + 1], u, side="right") - 1, 0, max(n - 1, 0))
        t0, t1 = T[i], T[i + 1]
        hh = t1 - t0
        z = (u - t0) / hh
        h00 = (1 + 2 * z) * (1 - z) ** 2
        h10 = z * (1 - z) ** 2
        h01 = z * z * (3 - 2 * z)
        h11 = z * z * (z - 1)
        return h00 * v[i] + h10 * hh * fa[i] + h01 * v[i + 1] + h11 * hh * fb[i]

    def rhs(t, y, n, regime):
        out = -y + at_one * y
        if xs.size:
            u = t * xs
            live = regime * xs > s
            if live.any():
                if n == 0:
                    raise RuntimeError("history requested before the first step")
                out += np.dot(ps[live], history(u[live], n))
            out += np.dot(ps[~live], np.exp(-u[~live]))
        return out

    for n in range(T.size - 1):
        t, step = T[n], T[n + 1] - T[n]
        mid = t + 0.5 * step
        k1 = rhs(t, v[n], n, mid)
        k2 = rhs(mid, v[n] + 0.5 * step * k1, n, mid)
        k3 = rhs(mid, v[n] + 0.5 * step * k2, n, mid)
        k4 = rhs(t + step, v[n] + step * k3, n, mid)
        v[n + 1] = v[n] + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        fa[n] = k1
        fb[n] = rhs(t + step, v[n + 1], n, mid)
    return T, v


def _atomic_grid(dist, s, T_max, grid_step, tol, max_levels):
    # each level splits every step of the previous one in two, so nodes nest
    T_prev, v_prev = _atomic_march(dist, s, T_max, grid_step)
    err = math.inf
    for lev in range(1, max_levels):
        T, v = _atomic_march(dist, s, T_max, grid_step, refine=2**lev)
        err = float(np.max(np.abs(v[::2] - v_prev)))
        T_prev, v_prev = T, v
        if err < tol:
            break
    return T_prev, v_prev, err


def solve_delay_ode(
    dist: FactorDistribution,
    s: float,
    T_max: float,
    grid_step: float | None = None,
    *,
    tol: float = 1e-8,
    max_levels: int = 5,
    backend: str | None = None,
) -> ValueGrid:
    """Tabulate v(., s) on [0, T_max].

    Continuous factors: implicit trapezoid march with the delay integral taken
    by the trapezoid rule on the same nodes, refined by step halving with
    Richardson extrapolation until successive estimates differ by < ``tol``.
    Atomic factors: RK4 on a grid containing every breakpoint s / prod(x_k),
    delayed values read from cubic Hermite interpolation of the computed
    solution, refined by halving.
    """
    if not (s > 0 and T_max > s):
        raise DomainError("need 0 < s < T_max")
    if grid_step is None:
        grid_step = min(0.05, T_max / 200)
    if grid_step <= 0 or T_max / grid_step < 200:
        raise ValueError("grid_step must give at least 200 points on [0, T_max]")

    if dist.discrete:
        T, v, err = _atomic_grid(dist, s, T_max, grid_step, tol, max_levels)
    else:
        T, v, err = _continuous_grid(dist, s, T_max, grid_step, tol, max_levels, backend)
    n_below = max(2, math.ceil(s / grid_step))
    T_low = np.linspace(0.0, s, n_below + 1)[:-1]
    v_low = np.array([p1(dist, t) for t in T_low])
    return ValueGrid(
        s=s,
        T_grid=np.concatenate([T_low, T]),
        v_values=np.concatenate([v_low, v]),
        dist_description=dist.description,
        method="delay_ode",
        refinement_error=err,
    )


# --- dispatch -------------------------------------------------------------------

def policy_value(dist: FactorDistribution, T: float, s: float | None = None) -> ValueReport:
    """v(T, s) by the best available route; ``s=None`` means the optimal threshold."""
    if s is None:
        s = solve_threshold(dist).s_star
    if T <= 0:
        raise DomainError("horizon must be positive")
    if isinstance(dist, Beta):
        return ValueReport(s, T, value_beta(dist.theta, T, s), "closed_beta")
    if isinstance(dist, Delta):
        if math.isinf(T) and dist.x < 1.0:
            raise DomainError("no infinite-horizon limit for a one-point factor x < 1")
        return ValueReport(s, T, value_delta(dist.x, T, s), "piecewise_delta")
    if math.isinf(T):
        if dist.lattice:
            raise DomainError(f"{dist.description} is lattice; the infinite-horizon limit need not exist")
        T_max = max(50.0, 20.0 * s)
        grid = solve_delay_ode(dist, s, T_max)
        tail = grid.T_grid >= T_max / 2
        bound = float(np.max(np.abs(grid.v_values[tail] - grid.v_values[-1])))
        return ValueReport(s, T, float(grid.v_values[-1]), "delay_ode", tail_bound=bound)
    if T <= s:
        return ValueReport(s, T, p1(dist, T), "delay_ode")
    grid = solve_delay_ode(dist, s, T, grid_step=min(0.05, T / 200))
    return ValueReport(s, T, float(grid.v_values[-1]), "delay_ode")


def optimal_value(dist: FactorDistribution, T: float) -> float:
    return policy_value(dist, T).value
