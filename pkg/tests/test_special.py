import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy.special import exp1, gammainc, gamma as gamma_fn

from lastrecord.special import (
    BracketError,
    DomainError,
    QuadratureError,
    find_root,
    incomplete_gamma,
    integrate,
)
from oracles import INCOMPLETE_GAMMA


class TestIntegrate:
    def test_polynomial_exact(self):
        res = integrate(lambda x: 3 * x**2 - x + 1, -1.0, 2.0)
        assert res.value == pytest.approx(9 - 1.5 + 3, abs=1e-13)
        assert res.evaluations >= 15

    def test_matches_scipy_quad(self):
        f = lambda x: np.exp(-x) * np.cos(5 * x)  # noqa: E731
        ref = sp_integrate.quad(f, 0, 3, epsabs=1e-14, epsrel=1e-13)[0]
        assert integrate(f, 0.0, 3.0).value == pytest.approx(ref, rel=1e-11)

    def test_semi_infinite(self):
        res = integrate(lambda x: np.exp(-x * x), 0.0, math.inf)
        assert res.value == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-11)

    def test_reversed_limits_rejected(self):
        with pytest.raises(DomainError):
            integrate(np.sin, 2.0, 0.5)

    def test_integrable_endpoint_singularity(self):
        res = integrate(lambda t: 0.1 * t**-0.9, 0.0, 1.0)
        assert res.value == pytest.approx(1.0, rel=1e-9)
        assert integrate(np.log, 0.0, 1.0).value == pytest.approx(-1.0, rel=1e-10)
        # near hi = 1 floats are spaced by eps, so mass 2 sqrt(eps) of (1-t)^-1/2 is out of reach
        both = integrate(lambda t: 1.0 / np.sqrt(t * (1.0 - t)), 0.0, 1.0)
        assert both.value == pytest.approx(math.pi, rel=1e-7)

    def test_threshold_integrand(self):
        # (e^t - 1)/t on (0, s*) integrates to 1 at the uniform threshold
        res = integrate(lambda t: np.expm1(t) / t, 0.0, 0.8043522628456376)
        assert res.value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize(
        "f, lo, hi",
        [
            (lambda x: np.exp(np.sin(3 * x)), 0.0, 4.0),
            (lambda x: 1.0 / (1.0 + 25.0 * x * x), -1.0, 1.0),
            (lambda x: np.log1p(x) * np.cos(x), 0.0, 10.0),
            (lambda x: x**7 * np.exp(-x), 0.0, 30.0),
        ],
    )
    def test_simpson_oracle(self, f, lo, hi):
        x = np.linspace(lo, hi, 200_001)
        ref = sp_integrate.simpson(f(x), x=x)
        assert integrate(f, lo, hi).value == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_empty_interval(self):
        assert integrate(lambda x: x, 1.0, 1.0).value == 0.0

    def test_non_finite_integrand_raises(self):
        with pytest.raises(QuadratureError):
            integrate(lambda x: 1.0 / (x - 0.5), 0.0, 1.0)

    def test_divergent_integral_raises(self):
        with pytest.raises(QuadratureError) as info:
            integrate(lambda x: 1.0 / x, 0.0, 1.0)
        assert info.value.partial.value > 0

    @given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
    def test_gaussian_mass(self, k, shift):
        f = lambda x: np.exp(-k * (x - shift) ** 2)  # noqa: E731
        rk = math.sqrt(k)
        ref = 0.5 * math.sqrt(math.pi / k) * (math.erf(rk * (5 - shift)) + math.erf(rk * (5 + shift)))
        assert integrate(f, -5.0, 5.0).value == pytest.approx(ref, rel=1e-10)


class TestFindRoot:
    def test_cubic(self):
        assert find_root(lambda x: x**3 - 2, 0.0, 2.0) == pytest.approx(2 ** (1 / 3), abs=1e-12)

    def test_no_bracket(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x * x + 1, -1.0, 1.0)

    @given(st.floats(0.01, 0.99))
    def test_recovers_planted_root(self, r):
        assert find_root(lambda x: math.tanh(x - r), 0.0, 1.0) == pytest.approx(r, abs=1e-11)


class TestIncompleteGamma:
    @pytest.mark.parametrize("args", sorted(INCOMPLETE_GAMMA))
    def test_frozen_oracle(self, args):
        assert incomplete_gamma(*args) == pytest.approx(INCOMPLETE_GAMMA[args], rel=1e-12)

    def test_exponential_integral(self):
        for b, c in [(0.01, 1.0), (0.5, 3.0), (2.0, 50.0), (1e-6, 1e-3)]:
            assert incomplete_gamma(0.0, b, c) == pytest.approx(exp1(b) - exp1(c), rel=1e-12)

    def test_infinite_upper_limit(self):
        assert incomplete_gamma(0.0, 0.804, math.inf) == pytest.approx(exp1(0.804), rel=1e-13)
        assert incomplete_gamma(2.5, 0.0, math.inf) == pytest.approx(gamma_fn(2.5), rel=1e-13)

    def test_empty_range(self):
        assert incomplete_gamma(0.7, 3.0, 3.0) == 0.0

    def test_rejects_divergent_lower_limit(self):
        with pytest.raises(DomainError):
            incomplete_gamma(0.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            incomplete_gamma(-0.5, 0.0, 1.0)

    @given(st.floats(0.05, 8.0), st.floats(0.0, 5.0), st.floats(0.01, 10.0))
    def test_lower_regularized_scipy(self, a, b, width):
        c = b + width
        ref = (gammainc(a, c) - gammainc(a, b)) * gamma_fn(a)
        assert incomplete_gamma(a, b, c) == pytest.approx(ref, rel=1e-9, abs=1e-300)

    @given(st.floats(-3.0, 3.0), st.floats(0.01, 4.0), st.floats(0.01, 4.0), st.floats(0.01, 4.0))
    def test_additive_in_range(self, a, b, w1, w2):
        whole = incomplete_gamma(a, b, b + w1 + w2)
        parts = incomplete_gamma(a, b, b + w1) + incomplete_gamma(a, b + w1, b + w1 + w2)
        assert whole == pytest.approx(parts, rel=1e-11)

    @given(st.floats(-2.0, 3.0), st.floats(0.05, 5.0), st.floats(0.05, 5.0))
    def test_integration_by_parts(self, a, b, width):
        c = b + width
        lhs = incomplete_gamma(a + 1, b, c)
        rhs = a * incomplete_gamma(a, b, c) + math.exp(-b) * b**a - math.exp(-c) * c**a
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-13)

    def test_closed_examples(self):
        assert incomplete_gamma(1.0, 0.0, math.inf) == 1.0
        assert incomplete_gamma(1.0, 0.0, 1.0) == pytest.approx(0.6321205588285577, rel=1e-15)

    @given(st.floats(-2.0, 3.0), st.floats(0.05, 5.0), st.floats(0.05, 5.0))
    def test_mpmath(self, a, b, width):
        mp.mp.dps = 30
        ref = mp.quad(lambda t: t ** (a - 1) * mp.e ** (-t), [b, b + width])
        assert incomplete_gamma(a, b, b + width) == pytest.approx(float(ref), rel=1e-11)
