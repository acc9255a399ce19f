import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from lastrecord.factor import (
    Beta,
    Delta,
    GeometricAtoms,
    IntervalSpace,
    ProductOfUniforms,
    RngStream,
    Uniform,
)
from lastrecord.special import DomainError
from lastrecord.stopping import (
    BThreshold,
    TimeThreshold,
    WeightThreshold,
    embedded_step,
    entrance_moments,
    p0,
    p1,
    parse_policy,
    solve_threshold,
    tau1_cdf,
    threshold_residual,
)

NON_DEGENERATE = [
    Uniform(),
    Beta(0.25),
    Beta(2.0),
    Beta(20.0),
    Delta(0.5),
    Delta(0.01),
    ProductOfUniforms(2),
    ProductOfUniforms(3),
    IntervalSpace(1.5),
    IntervalSpace(2.0),
    GeometricAtoms(0.5),
]
WITH_ENTRANCE = [Uniform(), Beta(0.5), Beta(3.0), ProductOfUniforms(2), IntervalSpace(2.0), Delta(0.5)]


class TestRisks:
    def test_p0(self):
        assert p0(0.0) == 1.0
        assert p0(1.0) == pytest.approx(0.36787944117144233, rel=1e-15)
        assert p0(0.804) == pytest.approx(0.4475, abs=1e-4)

    def test_p0_rejects_negative(self):
        with pytest.raises(DomainError):
            p0(-0.1)

    @pytest.mark.parametrize("dist", NON_DEGENERATE + [Delta(1.0)], ids=lambda d: d.description)
    def test_p1_at_zero(self, dist):
        assert p1(dist, 0.0) == 0.0

    @pytest.mark.parametrize("s", [0.2, 1.0, 3.0])
    def test_p1_delta_one(self, s):
        assert p1(Delta(1.0), s) == pytest.approx(s * math.exp(-s), rel=1e-14)

    @pytest.mark.parametrize("s", sorted(oracles.UNIFORM_P1))
    def test_p1_uniform_oracle(self, s):
        assert p1(Uniform(), s) == pytest.approx(oracles.UNIFORM_P1[s], rel=1e-10)

    def test_p1_equals_p0_at_threshold(self):
        s = solve_threshold(Uniform()).s_star
        assert p1(Uniform(), s) == pytest.approx(math.exp(-s), abs=1e-12)
        assert abs(p1(Uniform(), 0.804) - math.exp(-0.804)) < 1e-3

    @pytest.mark.parametrize("dist", NON_DEGENERATE, ids=lambda d: d.description)
    def test_monotone_case_ordering(self, dist):
        s_star = solve_threshold(dist).s_star
        for s in s_star * np.array([0.3, 0.7, 0.95, 0.99, 1.01, 1.05, 1.5, 3.0]):
            assert (p0(s) < p1(dist, s)) == (s > s_star)


class TestThreshold:
    @pytest.mark.parametrize("theta", sorted(oracles.BETA_THRESHOLD))
    def test_beta_oracle(self, theta):
        assert solve_threshold(Beta(theta)).s_star == pytest.approx(oracles.BETA_THRESHOLD[theta], abs=1e-11)

    def test_uniform_oracle(self):
        res = solve_threshold(Uniform())
        assert res.s_star == pytest.approx(oracles.BETA_THRESHOLD[1.0], abs=1e-11)
        assert round(res.s_star, 3) == 0.804
        assert res.dist_description == Uniform().description

    def test_reference_values(self):
        assert round(solve_threshold(Beta(0.25)).s_star, 3) == 0.731
        assert round(solve_threshold(Beta(5.0)).s_star, 3) == 0.922
        assert round(solve_threshold(Beta(20.0)).s_star, 3) == 0.977
        assert abs(solve_threshold(Beta(20.0)).s_star - 0.976) < 1e-3
        assert math.floor(solve_threshold(ProductOfUniforms(2)).s_star * 1000) == 743

    @pytest.mark.parametrize(
        "dist, ref",
        [
            (ProductOfUniforms(2), oracles.PRODUNIF_THRESHOLD[2]),
            (ProductOfUniforms(3), oracles.PRODUNIF_THRESHOLD[3]),
            (IntervalSpace(2.0), oracles.INTERVAL2_THRESHOLD),
            (GeometricAtoms(0.5), oracles.GEOM05_THRESHOLD),
        ],
        ids=lambda v: getattr(v, "description", ""),
    )
    def test_other_oracles(self, dist, ref):
        assert solve_threshold(dist).s_star == pytest.approx(ref, abs=1e-10)

    def test_delta_one_is_exactly_one(self):
        assert solve_threshold(Delta(1.0)).s_star == 1.0

    @pytest.mark.parametrize("dist", NON_DEGENERATE, ids=lambda d: d.description)
    def test_root_inside_unit_interval(self, dist):
        res = solve_threshold(dist)
        assert 0.0 < res.s_star < 1.0
        assert abs(res.residual) <= 1e-9
        assert abs(threshold_residual(dist, res.s_star)) <= 1e-9
        assert res.bracket_width <= 1e-12

    def test_increasing_in_theta(self):
        values = [solve_threshold(Beta(t)).s_star for t in (0.1, 0.25, 0.5, 1, 2, 5, 20, 200)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert values[-1] > 0.99

    def test_small_atom_tends_to_log2(self):
        assert abs(solve_threshold(Delta(0.001)).s_star - math.log(2)) < 1e-3

    @given(st.floats(0.001, 0.999))
    def test_delta_closed_form(self, x):
        s = solve_threshold(Delta(x)).s_star
        assert math.expm1(s * (1 - x)) / (1 - x) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(0.05, 30.0))
    def test_beta_residual(self, theta):
        res = solve_threshold(Beta(theta))
        assert 0 < res.s_star < 1
        assert abs(res.residual) <= 1e-9


class TestPolicies:
    def test_parse(self):
        assert parse_policy("bthresh:0.8") == BThreshold(0.8)
        assert parse_policy("wthresh:2") == WeightThreshold(2.0)
        assert parse_policy("tthresh:0") == TimeThreshold(0.0)
        opt = parse_policy("optimal", Uniform())
        assert opt.s == pytest.approx(oracles.BETA_THRESHOLD[1.0], abs=1e-11)

    def test_spec_round_trip(self):
        for pol in (BThreshold(0.5), WeightThreshold(3.0), TimeThreshold(0.25)):
            assert parse_policy(pol.spec) == pol

    @pytest.mark.parametrize("bad", ["bthresh:0", "bthresh:-1", "wthresh:0", "tthresh:-0.1", "nope:1", "optimal"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_policy(bad)


class TestEmbeddedChain:
    def test_absorbing(self):
        assert embedded_step(0.0, Uniform(), RngStream(0)) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            embedded_step(-1.0, Uniform(), RngStream(0))

    def test_delta_one_is_shifted_exponential(self):
        rng = RngStream(1)
        out = np.array([embedded_step(5.0, Delta(1.0), rng) for _ in range(20_000)])
        assert np.all((out >= 0) & (out <= 5))
        # (5 - E)_+ has mean 5 - (1 - e^-5)
        assert out.mean() == pytest.approx(5 - (1 - math.exp(-5)), abs=4 * out.std() / math.sqrt(out.size))

    @pytest.mark.parametrize("dist, s", [(Uniform(), 2.0), (Beta(3.0), 0.7), (GeometricAtoms(0.5), 1.3)])
    def test_absorption_probability(self, dist, s):
        rng = RngStream(2)
        n = 100_000
        zeros = sum(embedded_step(s, dist, rng) == 0.0 for _ in range(n))
        p = math.exp(-s)
        assert abs(zeros / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


class TestEntrance:
    def test_uniform_factorials(self):
        law = entrance_moments(Uniform(), 4)
        assert law.moments == pytest.approx((1, 2, 6, 24), rel=1e-10)

    @pytest.mark.parametrize("theta", [0.5, 2.0, 3.7])
    def test_beta_gamma_moments(self, theta):
        law = entrance_moments(Beta(theta), 5)
        ref = [math.gamma(theta + k) / math.gamma(theta) for k in range(1, 6)]
        assert law.moments == pytest.approx(ref, rel=1e-12)

    def test_product_of_two_uniforms(self):
        # E|log X| = 2, f(j) = (j+1)^-2: moments 1/2, 1/2 * 4/3, ...
        law = entrance_moments(ProductOfUniforms(2), 3)
        assert law.moments == pytest.approx((0.5, 2 / 3, 1.5), rel=1e-9)

    @pytest.mark.parametrize("dist", [Delta(1.0), Delta(0.5), GeometricAtoms(0.5)], ids=lambda d: d.description)
    def test_lattice_rejected(self, dist):
        with pytest.raises(DomainError):
            entrance_moments(dist, 3)

    def test_rejects_zero_moments(self):
        with pytest.raises(ValueError):
            entrance_moments(Uniform(), 0)

    @pytest.mark.parametrize("dist", [d for d in WITH_ENTRANCE if not d.lattice], ids=lambda d: d.description)
    def test_log_convex(self, dist):
        m = np.array((1.0,) + entrance_moments(dist, 8).moments)
        assert np.all(m > 0)
        assert np.all(m[1:-1] ** 2 <= m[:-2] * m[2:] * (1 + 1e-12))

    def test_tau1_closed_forms(self):
        law = entrance_moments(Uniform(), 2)
        assert tau1_cdf(law, Uniform(), 1.0).value == 1.0
        assert tau1_cdf(law, Uniform(), 0.5).value == pytest.approx(0.5)
        res = tau1_cdf(entrance_moments(Beta(2.0), 2), Beta(2.0), 0.5)
        assert res.value == pytest.approx(0.25)
        assert res.method == "closed_form"

    def test_tau1_rejects_bad_time(self):
        law = entrance_moments(Uniform(), 2)
        for t in (0.0, 1.5):
            with pytest.raises(DomainError):
                tau1_cdf(law, Uniform(), t)

    def test_tau1_simulation_fallback(self):
        # reference: E[exp(-lam Y)] summed from the moment series, lam = 1/t - 1
        dist = ProductOfUniforms(2)
        lam = 0.25
        m = entrance_moments(dist, 30).moments
        ref = 1.0 + sum((-lam) ** k * m[k - 1] / math.factorial(k) for k in range(1, 31))
        res = tau1_cdf(entrance_moments(dist, 2), dist, 0.8, paths=40_000, seed=3)
        assert res.method == "simulation"
        assert 0 < res.stderr < 0.01
        assert abs(res.value - ref) <= 4 * res.stderr

    def test_tau1_simulation_matches_beta_closed_form(self):
        from lastrecord.simulate import entrance_last_record_times

        times = entrance_last_record_times(Beta(2.0), paths=20_000, seed=4)
        est = float(np.mean(times < 0.5))
        assert abs(est - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / times.size)
