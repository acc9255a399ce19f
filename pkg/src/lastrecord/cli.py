"""Command-line interface: ``lastrecord <subcommand> ...``.

Scalar results are printed as JSON, tables as CSV; ``--out FILE`` writes to a
file whose extension (.json / .csv) picks the format. A usage error exits
with status 2 and a failed computation with status 1.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .factor import DIST_SPECS, DistSpecError, RngStream, parse_dist
from .special import BracketError, DomainError, QuadratureError
from .stopping import entrance_moments, parse_policy, solve_threshold, tau1_cdf

USAGE, FAILURE = 2, 1


class UsageError(Exception):
    pass


# --- formatting -------------------------------------------------------------------

def _num(x):
    """10 significant digits; non-finite floats become strings so the JSON stays valid."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
        return float(f"{x:.10g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _cell(x):
    v = _num(x)
    return repr(v) if isinstance(v, float) else str(v)


def _emit(args, payload: dict | None = None, table: tuple[list[str], list] | None = None, *, tabular=False):
    out = getattr(args, "out", None)
    fmt = "csv" if tabular else "json"
    if out:
        fmt = "csv" if out.lower().endswith(".csv") else "json"
    if fmt == "csv":
        if table is None:
            header = list(payload)
            rows = [[payload[k] for k in header]]
        else:
            header, rows = table
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_cell(c) for c in row] for row in rows])
        text = buf.getvalue()
    else:
        if payload is None:
            header, rows = table
            payload = {"columns": header, "rows": rows}
        payload = dict(payload)
        payload["input"] = _echo(args)
        text = json.dumps(_num(payload), indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _echo(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


# --- argument helpers ----------------------------------------------------------------

def _dist(spec: str):
    try:
        return parse_dist(spec)
    except DistSpecError as exc:
        msg = str(exc)
        if "valid:" not in msg:
            msg += f"; valid: {', '.join(DIST_SPECS)}"
        raise UsageError(msg) from None


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _horizon(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return _positive_float(text)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threshold_arg(text: str | None, dist) -> float:
    if text is None or text == "optimal":
        return solve_threshold(dist).s_star
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"--s must be a positive number or 'optimal', got {text!r}") from None
    if not v > 0:
        raise UsageError("--s must be positive")
    return v


# --- subcommands -----------------------------------------------------------------------

def cmd_threshold(args):
    dist = _dist(args.dist)
    res = solve_threshold(dist)
    _emit(args, {"s_star": res.s_star, "residual": res.residual, "bracket_width": res.bracket_width,
                 "dist": dist.description})


def cmd_value(args):
    from .value import policy_value

    dist = _dist(args.dist)
    s = _threshold_arg(args.s, dist)
    rep = policy_value(dist, args.horizon, s)
    payload = {"s": rep.s, "T": rep.T, "value": rep.value, "method": rep.method, "dist": dist.description}
    if rep.tail_bound is not None:
        payload["tail_bound"] = rep.tail_bound
    _emit(args, payload)


def cmd_table(args):
    from .factor import Beta
    from .value import value_beta

    try:
        thetas = [float(x) for x in args.theta_list.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--theta-list must be comma-separated numbers, got {args.theta_list!r}") from None
    if not thetas or any(t <= 0 for t in thetas):
        raise UsageError("--theta-list needs positive values")
    rows = []
    for th in thetas:
        s = solve_threshold(Beta(th)).s_star
        rows.append([th, s, value_beta(th, math.inf, s)])
    _emit(args, table=(["theta", "s_star", "v_inf"], rows), tabular=True)


def cmd_simulate(args):
    from .simulate import SimConfig, evaluate_policy

    dist = _dist(args.dist)
    try:
        policy = parse_policy(args.policy, dist)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = SimConfig(dist, args.r0, args.horizon, args.reps, args.seed)
    rep = evaluate_policy(cfg, policy, workers=args.workers)
    _emit(args, {"estimate": rep.estimate, "stderr": rep.stderr, "replicates": rep.replicates,
                 "seed": rep.seed, "non_stop_fraction": rep.non_stop_fraction, "policy": policy.spec,
                 "dist": dist.description})


def cmd_entrance(args):
    dist = _dist(args.dist)
    law = entrance_moments(dist, args.moments)
    payload = {"dist": dist.description, "moments": list(law.moments)}
    if args.paths:
        from .simulate import entrance_sample

        final = entrance_sample(dist, args.paths, args.seed, r0=args.r0, workers=args.workers)[0]
        payload["simulated_moments"] = [float(np.mean(final**k)) for k in range(1, args.moments + 1)]
        payload["simulated_stderr"] = [
            float(np.std(final**k, ddof=1) / math.sqrt(args.paths)) for k in range(1, args.moments + 1)
        ]
    if args.tau1 is not None:
        est = tau1_cdf(law, dist, args.tau1, paths=args.paths or 100_000, seed=args.seed)
        payload["tau1_cdf"] = {"t": args.tau1, "value": est.value, "method": est.method, "stderr": est.stderr}
    _emit(args, payload)


def cmd_winrate(args):
    from .uniform import win_rate_curve

    s = None if args.s in (None, "optimal") else _threshold_arg(args.s, None)
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    curve = win_rate_curve(s, args.grid)
    rows = [[t, w, f] for t, w, f in zip(curve.t_grid, curve.w_values, curve.density_values)]
    _emit(args, table=(["t", "w", "density"], rows), tabular=True)


def cmd_ode(args):
    from .value import solve_delay_ode

    dist = _dist(args.dist)
    s = _threshold_arg(args.s, dist)
    if not args.tmax > s:
        raise UsageError(f"--tmax must exceed the threshold s = {s:.6g}")
    grid = solve_delay_ode(dist, s, args.tmax, args.step)
    rows = [[t, v] for t, v in zip(grid.T_grid, grid.v_values)]
    _emit(args, table=(["T", "v"], rows), tabular=True)


def cmd_chain_records(args):
    from .simulate import Cube, Interval, sample_chain_records

    name, _, arg = args.space.partition(":")
    try:
        space = Cube(int(arg)) if name == "cube" else Interval(float(arg)) if name == "interval" else None
    except ValueError as exc:
        raise UsageError(f"bad --space {args.space!r}: {exc}") from None
    if space is None:
        raise UsageError(f"unknown --space {args.space!r}; valid: cube:<d>, interval:<alpha>")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    w = sample_chain_records(space, args.n, RngStream(args.seed), skip=not args.naive)
    _emit(args, table=(["index", "weight"], [[i + 1, x] for i, x in enumerate(w)]), tabular=True)


def cmd_verify(args):
    from .verify import run_all

    results = run_all()
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else FAILURE


# --- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .simulate import default_workers

    p = argparse.ArgumentParser(prog="lastrecord", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--verify-paper", action="store_true",
                   help="run the reproduction battery and print a pass/fail table")
    sub = p.add_subparsers(dest="command")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output file; .csv or .json selects the format")
        return sp

    sp = add("threshold", cmd_threshold, "optimal threshold s*")
    sp.add_argument("--dist", required=True, help=f"one of {', '.join(DIST_SPECS)}")

    sp = add("value", cmd_value, "success probability of the threshold policy")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--horizon", required=True, type=_horizon, help="T > 0 or 'inf'")
    sp.add_argument("--s", help="threshold, or 'optimal' (default)")

    sp = add("table", cmd_table, "s* and v(inf, s*) for a list of beta parameters")
    sp.add_argument("--theta-list", default="0.1,0.25,0.5,1,2,5,20")

    workers = default_workers()
    sp = add("simulate", cmd_simulate, "Monte Carlo success probability of a policy")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--r0", required=True, type=_positive_float)
    sp.add_argument("--horizon", required=True, type=_positive_float)
    sp.add_argument("--policy", required=True, help="bthresh:<s> | wthresh:<w> | tthresh:<t0> | optimal")
    sp.add_argument("--reps", required=True, type=int)
    sp.add_argument("--seed", required=True, type=_seed)
    sp.add_argument("--workers", type=int, default=workers, help="default: $LAST_RECORD_WORKERS or 1")

    sp = add("entrance", cmd_entrance, "moments of the entrance law (and optional simulation)")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--moments", type=int, default=4)
    sp.add_argument("--paths", type=int, default=0, help="simulate this many large-state paths")
    sp.add_argument("--r0", type=_positive_float, default=1e8)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--tau1", type=_positive_float, help="also report P(last record before t)")
    sp.add_argument("--workers", type=int, default=workers)

    sp = add("winrate", cmd_winrate, "winning rate and stop-time density for the uniform factor")
    sp.add_argument("--s", help="threshold, or 'optimal' (default)")
    sp.add_argument("--grid", type=int, default=101)

    sp = add("ode", cmd_ode, "tabulate v(T, s) by the delay equation")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--s", help="threshold, or 'optimal' (default)")
    sp.add_argument("--tmax", type=_positive_float, default=10.0)
    sp.add_argument("--step", type=_positive_float, default=None)

    sp = add("chain-records", cmd_chain_records, "weights of chain records among i.i.d. marks")
    sp.add_argument("--space", required=True, help="cube:<d> | interval:<alpha>")
    sp.add_argument("--n", required=True, type=float, help="number of marks")
    sp.add_argument("--seed", required=True, type=_seed)
    sp.add_argument("--naive", action="store_true", help="scan every mark instead of skipping ahead")
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verify_paper:
        return cmd_verify(args)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"lastrecord {args.command}: error: {exc}", file=sys.stderr)
        return USAGE
    except (DomainError, BracketError, QuadratureError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"lastrecord {args.command}: numerical failure: {exc}", file=sys.stderr)
        return FAILURE
    return int(code or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
