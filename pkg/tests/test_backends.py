"""The compiled kernels and the pure-Python fallback must agree draw for draw."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lastrecord import _backend
from lastrecord.factor import Beta, Delta, GeometricAtoms, IntervalSpace, ProductOfUniforms, RngStream, Uniform
from lastrecord.simulate import BLOCK, Cube, Interval, SimConfig, evaluate_discrete, evaluate_policy, sample_chain_records
from lastrecord.stopping import BThreshold, TimeThreshold, WeightThreshold
from lastrecord.value import solve_delay_ode

compiled = pytest.mark.skipif(_backend.compiled_kernels is None, reason="compiled kernels not built")
py = _backend.python_kernels
KERNEL_DISTS = [Uniform(), Beta(0.4), Beta(3.0), Delta(0.6), ProductOfUniforms(3), IntervalSpace(1.05),
                IntervalSpace(2.5), GeometricAtoms(0.4)]


def codes(dist):
    return dist.kernel_code, dist.kernel_params[0]


@compiled
class TestParity:
    @pytest.mark.parametrize("dist", KERNEL_DISTS, ids=lambda d: d.description)
    @pytest.mark.parametrize("policy", [(0, 0.8), (1, 5.0), (2, 0.4)], ids=["bthresh", "wthresh", "tthresh"])
    def test_simulate_policy(self, dist, policy):
        c = _backend.compiled_kernels
        kind, param = codes(dist)
        args = (kind, param, 30.0, 1.0, policy[0], policy[1], 3000)
        assert c.simulate_policy(RngStream(1, 2), *args) == py.simulate_policy(RngStream(1, 2), *args)

    @pytest.mark.parametrize("dist", [d for d in KERNEL_DISTS if not d.lattice], ids=lambda d: d.description)
    def test_entrance_paths(self, dist):
        c = _backend.compiled_kernels
        kind, param = codes(dist)
        a = c.entrance_paths(RngStream(3), kind, param, 1e4, 1.0, 500)
        b = py.entrance_paths(RngStream(3), kind, param, 1e4, 1.0, 500)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    @pytest.mark.parametrize("dist", [Uniform(), Beta(2.0), IntervalSpace(1.5)], ids=lambda d: d.description)
    def test_discrete(self, dist):
        c = _backend.compiled_kernels
        kind, param = codes(dist)
        args = (kind, param, 300.0, 0.8, 2000)
        assert c.simulate_discrete(RngStream(4), *args) == py.simulate_discrete(RngStream(4), *args)

    @pytest.mark.parametrize("skip", [True, False])
    @pytest.mark.parametrize("space", [Cube(1), Cube(3), Interval(1.5), Interval(4.0)], ids=str)
    def test_chain_records(self, space, skip):
        n = 1e12 if skip else 3000
        a = sample_chain_records(space, n, RngStream(5), skip, backend="compiled")
        b = sample_chain_records(space, n, RngStream(5), skip, backend="python")
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("dist", [Uniform(), Beta(0.5), ProductOfUniforms(2), IntervalSpace(2.0)],
                             ids=lambda d: d.description)
    def test_delay_ode_march(self, dist):
        a = solve_delay_ode(dist, 0.75, 4.0, max_levels=2, backend="compiled")
        b = solve_delay_ode(dist, 0.75, 4.0, max_levels=2, backend="python")
        assert np.allclose(a.v_values, b.v_values, rtol=0, atol=1e-13)

    def test_public_api_backend_switch(self):
        cfg = SimConfig(Beta(2.0), 1e3, 1.0, BLOCK + 9, seed=77)
        for pol in (BThreshold(0.86), WeightThreshold(1.0), TimeThreshold(0.3)):
            assert evaluate_policy(cfg, pol, backend="compiled") == evaluate_policy(cfg, pol, backend="python")
        a = evaluate_discrete(Uniform(), 100, 0.8, 2000, seed=3, backend="compiled")
        b = evaluate_discrete(Uniform(), 100, 0.8, 2000, seed=3, backend="python")
        assert a == b


def test_backend_names():
    assert _backend.get_kernels("python") is py
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
    if _backend.compiled_kernels is None:
        with pytest.raises(RuntimeError):
            _backend.get_kernels("compiled")
    assert _backend.BACKEND in ("compiled", "python")


def test_pure_python_env_var():
    env = dict(os.environ, LASTRECORD_PURE_PYTHON="1")
    code = "import lastrecord, json; print(json.dumps([lastrecord.BACKEND, lastrecord.solve_threshold(lastrecord.Uniform()).s_star]))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, s = json.loads(out.stdout)
    assert backend == "python"
    assert abs(s - 0.8043522628456376) < 1e-11


@compiled
def test_benchmark_smoke():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--scale", "0.02", "--repeat", "1"],
                         capture_output=True, text=True, check=True)
    rows = out.stdout.strip().splitlines()[1:]
    assert len(rows) == 7
    assert all(r.endswith("True") for r in rows)
