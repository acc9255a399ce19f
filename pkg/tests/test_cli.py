import csv
import io
import json
import math
import subprocess
import sys

import pytest

import oracles
from lastrecord import __version__
from lastrecord.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def as_json(capsys, *argv):
    code, out, err = call(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def as_csv(capsys, *argv):
    code, out, err = call(capsys, *argv)
    assert code == 0, err
    return list(csv.reader(io.StringIO(out)))


class TestThreshold:
    def test_beta_one(self, capsys):
        res = as_json(capsys, "threshold", "--dist", "beta:1")
        assert round(res["s_star"], 3) == 0.804
        assert res["s_star"] == pytest.approx(oracles.BETA_THRESHOLD[1.0], rel=1e-9)
        assert abs(res["residual"]) <= 1e-9
        assert res["input"]["dist"] == "beta:1"

    def test_unknown_dist(self, capsys):
        code, out, err = call(capsys, "threshold", "--dist", "nosuch")
        assert code == 2
        assert out == ""
        assert "uniform" in err and "beta:<theta>" in err
        assert err.count("beta:<theta>") == 1

    def test_missing_flag(self, capsys):
        code, _, err = call(capsys, "threshold")
        assert code == 2
        assert "--dist" in err

    def test_no_subcommand(self, capsys):
        assert call(capsys)[0] == 2

    def test_version(self, capsys):
        code, out, _ = call(capsys, "--version")
        assert code == 0 and __version__ in out


class TestValue:
    def test_infinite_horizon(self, capsys):
        res = as_json(capsys, "value", "--dist", "uniform", "--horizon", "inf")
        assert res["method"] == "closed_beta"
        assert res["T"] == "inf"
        assert res["value"] == pytest.approx(oracles.BETA_VINF[1.0], rel=1e-9)

    def test_explicit_threshold(self, capsys):
        res = as_json(capsys, "value", "--dist", "delta:1", "--horizon", "2", "--s", "1")
        assert res["value"] == pytest.approx(math.exp(-1), rel=1e-9)
        assert res["method"] == "piecewise_delta"

    def test_delay_ode_tail_bound(self, capsys):
        res = as_json(capsys, "value", "--dist", "produnif:2", "--horizon", "inf")
        assert res["method"] == "delay_ode"
        assert 0 < res["tail_bound"] < 1e-3

    def test_numerical_failure(self, capsys):
        code, _, err = call(capsys, "value", "--dist", "geomatoms:0.5", "--horizon", "inf")
        assert code == 1
        assert "lattice" in err

    @pytest.mark.parametrize("bad", [["--horizon", "-1"], ["--horizon", "abc"], ["--horizon", "2", "--s", "-3"]])
    def test_usage_errors(self, capsys, bad):
        assert call(capsys, "value", "--dist", "uniform", *bad)[0] == 2


class TestTable:
    def test_three_rows(self, capsys):
        rows = as_csv(capsys, "table", "--theta-list", "0.1,1,20")
        assert rows[0] == ["theta", "s_star", "v_inf"]
        got = {float(r[0]): (float(r[1]), float(r[2])) for r in rows[1:]}
        ref = {0.1: (0.709, 0.913), 1.0: (0.804, 0.580), 20.0: (0.976, 0.377)}
        for th, (s, v) in ref.items():
            assert abs(got[th][0] - s) <= 1e-3
            assert abs(got[th][1] - v) <= 1e-3

    def test_default_list(self, capsys):
        rows = as_csv(capsys, "table")
        assert len(rows) == 8

    def test_json_output_file(self, capsys, tmp_path):
        path = tmp_path / "table.json"
        assert run(["table", "--theta-list", "2", "--out", str(path)]) == 0
        data = json.loads(path.read_text())
        assert data["columns"] == ["theta", "s_star", "v_inf"]
        assert data["rows"][0][1] == pytest.approx(oracles.BETA_THRESHOLD[2.0], rel=1e-9)

    def test_bad_list(self, capsys):
        assert call(capsys, "table", "--theta-list", "1,x")[0] == 2
        assert call(capsys, "table", "--theta-list", "0")[0] == 2


class TestSimulate:
    ARGS = ["simulate", "--dist", "uniform", "--r0", "1", "--horizon", "5", "--policy", "optimal",
            "--reps", "20000", "--seed", "42"]

    def test_report(self, capsys):
        res = as_json(capsys, *self.ARGS)
        assert set(res) >= {"estimate", "stderr", "replicates", "seed", "non_stop_fraction", "input"}
        assert res["replicates"] == 20000 and res["seed"] == 42
        assert 0.5 < res["estimate"] < 0.65
        assert res["input"]["seed"] == 42 and res["input"]["dist"] == "uniform"

    def test_seed_determines_output(self, capsys):
        a = as_json(capsys, *self.ARGS)
        b = as_json(capsys, *self.ARGS, "--workers", "3")
        a.pop("input"), b.pop("input")
        assert a == b
        c = as_json(capsys, *self.ARGS[:-1], "43")
        assert c["estimate"] != a["estimate"]

    def test_replay_from_echo(self, capsys):
        first = as_json(capsys, *self.ARGS)
        echo = first["input"]
        argv = ["simulate"] + [x for k in ("dist", "r0", "horizon", "policy", "reps", "seed")
                               for x in (f"--{k}", str(echo[k]))]
        second = as_json(capsys, *argv)
        assert second["estimate"] == first["estimate"]

    def test_env_workers(self, capsys, monkeypatch):
        monkeypatch.setenv("LAST_RECORD_WORKERS", "2")
        res = as_json(capsys, *self.ARGS)
        assert res["input"]["workers"] == 2

    def test_csv_out(self, capsys, tmp_path):
        path = tmp_path / "sim.csv"
        assert run(self.ARGS + ["--out", str(path)]) == 0
        rows = list(csv.reader(path.open()))
        assert rows[0][:2] == ["estimate", "stderr"]
        assert len(rows) == 2

    @pytest.mark.parametrize("policy", ["bthresh:0.8", "wthresh:1", "tthresh:0.5"])
    def test_policies(self, capsys, policy):
        argv = list(self.ARGS)
        argv[argv.index("optimal")] = policy
        assert 0 <= as_json(capsys, *argv)["estimate"] <= 1

    @pytest.mark.parametrize("bad", [("--policy", "nope"), ("--seed", "-1"), ("--r0", "0")])
    def test_usage_errors(self, capsys, bad):
        argv = list(self.ARGS)
        i = argv.index(bad[0])
        argv[i + 1] = bad[1]
        assert call(capsys, *argv)[0] == 2


class TestEntrance:
    def test_closed_form(self, capsys):
        res = as_json(capsys, "entrance", "--dist", "uniform", "--moments", "4")
        assert res["moments"] == pytest.approx([1, 2, 6, 24])

    def test_simulated(self, capsys):
        res = as_json(capsys, "entrance", "--dist", "beta:2", "--moments", "2", "--paths", "20000", "--seed", "3")
        for m, sim, se in zip(res["moments"], res["simulated_moments"], res["simulated_stderr"]):
            assert abs(m - sim) <= 5 * se

    def test_tau1(self, capsys):
        res = as_json(capsys, "entrance", "--dist", "beta:2", "--tau1", "0.5")
        assert res["tau1_cdf"]["value"] == pytest.approx(0.25)
        assert res["tau1_cdf"]["method"] == "closed_form"

    def test_lattice_rejected(self, capsys):
        assert call(capsys, "entrance", "--dist", "delta:1")[0] == 1


class TestCurves:
    def test_winrate(self, capsys):
        rows = as_csv(capsys, "winrate", "--grid", "11")
        assert rows[0] == ["t", "w", "density"]
        assert len(rows) == 12
        w0 = float(rows[1][1])
        assert w0 == pytest.approx(1 - math.exp(-oracles.BETA_THRESHOLD[1.0]), rel=1e-9)

    def test_winrate_grid_check(self, capsys):
        assert call(capsys, "winrate", "--grid", "1")[0] == 2

    def test_ode(self, capsys):
        rows = as_csv(capsys, "ode", "--dist", "beta:1", "--tmax", "5")
        assert rows[0] == ["T", "v"]
        T, v = float(rows[-1][0]), float(rows[-1][1])
        assert T == pytest.approx(5.0)
        assert v == pytest.approx(oracles.BETA_VALUE[(1.0, 5.0)], abs=1e-6)

    def test_ode_tmax_check(self, capsys):
        assert call(capsys, "ode", "--dist", "beta:1", "--tmax", "0.5")[0] == 2

    def test_chain_records(self, capsys, tmp_path):
        path = tmp_path / "w.csv"
        assert run(["chain-records", "--space", "cube:2", "--n", "1e6", "--seed", "1", "--out", str(path)]) == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["index", "weight"]
        w = [float(r[1]) for r in rows[1:]]
        assert all(a > b for a, b in zip(w, w[1:]))

    def test_chain_records_naive_and_bad_space(self, capsys):
        rows = as_csv(capsys, "chain-records", "--space", "interval:2", "--n", "500", "--seed", "2", "--naive")
        assert len(rows) >= 2
        assert call(capsys, "chain-records", "--space", "ball:2", "--n", "5", "--seed", "0")[0] == 2
        assert call(capsys, "chain-records", "--space", "interval:1", "--n", "5", "--seed", "0")[0] == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lastrecord", "threshold", "--dist", "delta:1"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["s_star"] == 1.0
