"""Regenerate tests/oracles.py.

Every number here is computed without importing ``lastrecord``: thresholds and
closed forms in 40-digit mpmath, delay equations for atomic factors by the
method of steps with scipy's DOP853 at rtol 1e-13.

    python tools/make_oracles.py > tests/oracles.py
"""
import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 40


def jump_expectation(density, s):
    """E[(e^{s(1-X)} - 1)/(1 - X)] for a density on (0, 1)."""

    def g(x):
        y = 1 - x
        return mp.expm1(s * y) / y * density(x)

    return mp.quad(g, [0, mp.mpf(1) / 2, 1])


def threshold(density):
    return mp.findroot(lambda s: jump_expectation(density, s) - 1, mp.mpf("0.8"))


def beta_jump_series(theta, s):
    """Same expectation for beta(theta, 1) as the series sum_n s^n Gamma(theta+1) / (n Gamma(theta+n)).

    Used instead of direct quadrature: tanh-sinh loses digits on x^(theta-1) for small theta.
    """
    return mp.nsum(lambda n: s**n * mp.gamma(theta + 1) / (n * mp.gamma(theta + n)), [1, mp.inf])


def beta_threshold(theta):
    return mp.findroot(lambda s: beta_jump_series(theta, s) - 1, mp.mpf("0.8"))


def beta_p1(theta, s):
    return mp.e ** (-s) * beta_jump_series(theta, s)


def beta_v(theta, T, s):
    """Closed form through the upper incomplete gamma function."""
    if T <= s:
        return beta_p1(theta, T)
    lap = theta * s ** (-theta) * mp.gammainc(theta, 0, s)
    d1 = -beta_p1(theta, s) + lap
    pref = mp.e**s * s**theta
    return pref * mp.gammainc(1 - theta, s, T) * d1 + beta_p1(theta, s)


def atomic_threshold(xs, ps):
    def h(s):
        return sum(p * (s if x == 1 else mp.expm1(s * (1 - x)) / (1 - x)) for x, p in zip(xs, ps)) - 1

    return mp.findroot(h, mp.mpf("0.8"))


def atomic_value(xs, ps, s, T_end):
    """Method of steps: on each window between breakpoints s / x products the
    delayed arguments x T lie in windows already solved."""
    xs = np.asarray(xs, float)
    ps = np.asarray(ps, float)
    s = float(s)
    pts = {s}
    frontier = [s]
    while frontier:
        nxt = []
        for b in frontier:
            for x in xs:
                c = b / x
                if c < T_end and all(abs(c - q) > 1e-12 for q in pts):
                    pts.add(c)
                    nxt.append(c)
        frontier = nxt
    bps = sorted(pts) + [T_end]
    pieces = []

    def v_hist(u):
        if u <= s:
            return sum(p * (math.exp(-x * u) - math.exp(-u)) / (1 - x) for x, p in zip(xs, ps))
        for a, b, sol in pieces:
            if a <= u <= b:
                return float(sol.sol(u)[0])
        raise RuntimeError(u)

    v0 = v_hist(s)
    for a, b in zip(bps[:-1], bps[1:]):
        mid = 0.5 * (a + b)
        live = mid * xs > s

        def rhs(T, y, live=live):
            out = -y[0]
            for x, p, lv in zip(xs, ps, live):
                out += p * (v_hist(x * T) if lv else math.exp(-x * T))
            return [out]

        sol = solve_ivp(rhs, (a, b), [v0], method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
        pieces.append((a, b, sol))
        v0 = float(sol.y[0, -1])
    return v_hist


def main():
    out = []
    emit = out.append
    emit('"""Frozen oracle values; regenerate with ``python tools/make_oracles.py``."""')
    emit("")

    thetas = [0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0]
    s_beta = {th: beta_threshold(mp.mpf(th)) for th in thetas}
    emit("# root of E[(e^{s(1-X)}-1)/(1-X)] = 1, X ~ beta(theta, 1)")
    emit("BETA_THRESHOLD = {")
    for th in thetas:
        emit(f"    {th!r}: {mp.nstr(s_beta[th], 17)},")
    emit("}")
    emit("# v(inf, s*) = e^s s^theta Gamma(1-theta, s) p1'(s) + p1(s)")
    emit("BETA_VINF = {")
    for th in thetas:
        emit(f"    {th!r}: {mp.nstr(beta_v(mp.mpf(th), mp.inf, s_beta[th]), 17)},")
    emit("}")

    emit("# v(T, s*) for beta factors at finite horizons")
    emit("BETA_VALUE = {")
    for th in (0.5, 1.0, 2.0):
        for T in (0.5, 2.0, 5.0):
            emit(f"    ({th!r}, {T!r}): {mp.nstr(beta_v(mp.mpf(th), mp.mpf(T), s_beta[th]), 17)},")
    emit("}")

    emit("# uniform: p1(s) = e^{-s} (Ei(s) - euler - log s)")
    emit("UNIFORM_P1 = {")
    for s in ("0.1", "0.5", "1.0", "3.0"):
        sv = mp.mpf(s)
        emit(f"    {s}: {mp.nstr(mp.e ** (-sv) * (mp.ei(sv) - mp.euler - mp.log(sv)), 17)},")
    emit("}")

    prod = {}
    for d in (2, 3):
        dens = (lambda d: lambda x: (-mp.log(x)) ** (d - 1) / mp.factorial(d - 1))(d)
        prod[d] = threshold(dens)
    emit("PRODUNIF_THRESHOLD = {" + ", ".join(f"{d}: {mp.nstr(v, 17)}" for d, v in prod.items()) + "}")
    alpha = mp.mpf(2)
    interval = threshold(lambda x: (alpha - 1) * (x ** (-1 / alpha) - 1))
    emit(f"INTERVAL2_THRESHOLD = {mp.nstr(interval, 17)}")

    q = mp.mpf("0.5")
    atoms = [q**k for k in range(1, 120)]
    probs = [(1 - q) * q ** (k - 1) for k in range(1, 120)]
    geo = atomic_threshold(atoms, probs)
    emit(f"GEOM05_THRESHOLD = {mp.nstr(geo, 17)}")

    emit("# one-point factor: s* = log(2 - x)/(1 - x); v by the method of steps")
    emit("DELTA_VALUE = {")
    for x, horizons in ((0.5, (2.0, 5.0, 10.0)), (0.9, (2.0, 5.0, 10.0)), (0.99, (2.0, 5.0))):
        s = mp.log(2 - mp.mpf(x)) / (1 - mp.mpf(x))
        v = atomic_value([x], [1.0], s, horizons[-1])
        for T in horizons:
            emit(f"    ({x!r}, {T!r}): {v(T)!r},")
    emit("}")

    ga = [0.5**k for k in range(1, 48)]
    gp = [0.5**k for k in range(1, 48)]
    v = atomic_value(ga, gp, float(geo), 10.0)
    emit(f"GEOM05_VALUE_T10 = {v(10.0)!r}")

    s1 = s_beta[1.0]

    def w(t):
        u = 1 - t
        e1 = lambda a, b: mp.e1(a) - mp.e1(b)  # noqa: E731
        return (
            -mp.e ** (-s1)
            + (mp.e ** (-s1 * t) - mp.e ** (-s1 * t / u)) / t
            + (mp.e ** (-s1 * t) - t * mp.e ** (-s1)) / u
            + s1 / u * (e1(s1, s1 / u) - e1(s1 * t, s1 * t / u))
        )

    def f(t):
        return (mp.e ** (-s1 * t) - mp.e ** (-s1 * t / (1 - t))) / t**2

    emit("# uniform factor at s*: winning rate and stop-time density")
    emit("WIN_RATE = {" + ", ".join(f"{t}: {mp.nstr(w(mp.mpf(t)), 17)}" for t in ("0.1", "0.5", "0.9")) + "}")
    emit("STOP_DENSITY = {" + ", ".join(f"{t}: {mp.nstr(f(mp.mpf(t)), 17)}" for t in ("0.1", "0.5", "0.9")) + "}")
    emit(f"WIN_RATE_INTEGRAL = {mp.nstr(mp.quad(w, [0, 0.5, 1]), 17)}")
    emit(f"STOP_DENSITY_INTEGRAL = {mp.nstr(mp.quad(f, [0, 0.5, 1]), 17)}")

    emit("# incomplete gamma Gamma(a, b, c) = int_b^c t^(a-1) e^-t dt")
    emit("INCOMPLETE_GAMMA = {")
    for a, b, c in [(0.5, 0, 1), (0.1, 0, 3), (2.5, 0, 10), (0, 0.1, 2), (0, 5, 40), (-1.5, 0.2, 3), (0.9, 2, 2.001),
                    (1, 0.3, 7), (5, 50, 60), (0, 1e-8, 1e-7)]:
        val = mp.e1(b) - mp.e1(c) if a == 0 else mp.gammainc(a, b, c)
        emit(f"    ({a!r}, {b!r}, {c!r}): {mp.nstr(val, 17)},")
    emit("}")
    print("\n".join(out))


if __name__ == "__main__":
    main()
