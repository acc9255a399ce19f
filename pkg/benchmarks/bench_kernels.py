"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each workload runs on both backends with the same random stream and the
outputs are compared. The Python fallback runs once; the compiled time is the
best of ``--repeat`` runs.
"""
import argparse
import time

import numpy as np

from lastrecord import _backend
from lastrecord.factor import Beta, IntervalSpace, RngStream, Uniform
from lastrecord.simulate import Cube, Interval, sample_chain_records
from lastrecord.value import solve_delay_ode


def workloads(scale):
    n = max(1, int(20_000 * scale))

    def policy(kern):
        d = Uniform()
        return kern.simulate_policy(RngStream(1), d.kernel_code, d.kernel_params[0], 1e4, 1.0, 0, 0.804, n)

    def entrance(kern):
        d = Beta(2.0)
        return kern.entrance_paths(RngStream(2), d.kernel_code, d.kernel_params[0], 1e6, 1.0, n // 4)

    def interval_sampler(kern):
        d = IntervalSpace(1.5)
        return kern.simulate_policy(RngStream(3), d.kernel_code, d.kernel_params[0], 1e3, 1.0, 0, 0.72, n // 4)

    def discrete(kern):
        d = Uniform()
        return kern.simulate_discrete(RngStream(4), d.kernel_code, d.kernel_params[0], 1e4, 0.804, n)

    def chains_scan(kern):
        return kern.chain_records_cube(RngStream(5), 2, float(n * 5), False)

    def chains_skip(kern):
        return [kern.chain_records_interval(RngStream(6, k), 2.0, 1e300, True) for k in range(50)]

    def delay_ode(kern):
        name = "compiled" if kern is _backend.compiled_kernels else "python"
        return solve_delay_ode(Uniform(), 0.804, 10.0 * max(scale, 0.2), max_levels=2, backend=name).v_values

    return [
        ("policy: uniform bthresh", policy),
        ("policy: interval factor", interval_sampler),
        ("entrance paths: beta(2)", entrance),
        ("discrete index policy", discrete),
        ("chain records, scan", chains_scan),
        ("chain records, skip", chains_skip),
        ("delay-ODE march", delay_ode),
    ]


def same(a, b):
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and np.allclose(a, b, rtol=0, atol=1e-12)
    return a == b


def best_time(fn, kern, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(kern)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every workload size")
    args = ap.parse_args()
    comp, py = _backend.compiled_kernels, _backend.python_kernels
    if comp is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"{'workload':28s} {'python [s]':>11s} {'compiled [s]':>13s} {'speed-up':>9s}  match")
    for name, fn in workloads(args.scale):
        t_py, out_py = best_time(fn, py, 1)
        t_c, out_c = best_time(fn, comp, args.repeat)
        print(f"{name:28s} {t_py:11.3f} {t_c:13.4f} {t_py / t_c:8.1f}x  {same(out_py, out_c)}")


if __name__ == "__main__":
    main()
