import json
import subprocess
import sys

import numpy as np
import pytest

from confgeo.cli import main
from confgeo.oracles import CircleParams, circle, circle_curve
from confgeo.trajectory import Trajectory

CIRCLE_IC = "0,0,0;1,0,0;0,2,0"  # the oracle circle with A0 = e2 has X''(0) = 2 e2


def run(*argv):
    return main([str(a) for a in argv])


def test_integrate_circle_matches_oracle(tmp_path):
    out = tmp_path / "c.csv"
    assert run("integrate", "--ic", CIRCLE_IC, "--t1", 1, "--samples", 11, "--out", out) == 0
    tr = Trajectory.from_csv(out)
    ref = circle(CircleParams(np.zeros(3), np.eye(3)[0], np.eye(3)[1]), tr.t)
    assert np.max(np.abs(tr.x - ref)) < 1e-8
    assert tr.J is not None


def test_integrate_output_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run("integrate", "--ic", CIRCLE_IC, "--equation", "mercator4", "--c-vector", "0,0,1", "--out", p) == 0
    assert a.read_bytes() == b.read_bytes()
    j1, j2 = tmp_path / "a.json", tmp_path / "b.json"
    for p in (j1, j2):
        assert run("integrate", "--ic", CIRCLE_IC, "--format", "json", "--out", p) == 0
    assert j1.read_bytes() == j2.read_bytes()
    assert len(json.loads(j1.read_text())["meta"]["config_hash"]) == 64


def test_integrate_from_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"equation": "mercator4", "ic": {"x": [0, 0, 0], "U": [1, 0, 0], "A": [0, 1, 0], "J": [-1.5, 0, 0]},
                               "t1": 0.5, "samples": 6, "output": {"format": "json"}}))
    out = tmp_path / "o.json"
    assert run("integrate", "--config", cfg, "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["equation"] == "mercator4" and len(d["t"]) == 6


def test_integrate_other_equations(tmp_path):
    for extra in (["--equation", "geodesic", "--ic", "0,0,0;1,0,0"],
                  ["--equation", "arclength", "--ic", "0,0,0;1,0,0;0,2,0"],
                  ["--metric", "round-sphere-stereographic", "--ic", "0.1,0,0;1,0,0;0,1,0"],
                  ["--method", "rk4", "--step", "0.01", "--ic", CIRCLE_IC]):
        assert run("integrate", *extra, "--out", tmp_path / "x.csv") == 0


@pytest.mark.parametrize("argv", [
    ["integrate"],  # no initial data
    ["integrate", "--ic", "0,0;1,0,0;0,1,0"],  # dimension mismatch
    ["integrate", "--ic", "0,0,0;1,a,0"],  # not a number
    ["integrate", "--ic", CIRCLE_IC, "--c-vector", "0,0,1"],  # C with cg3
    ["integrate", "--equation", "mercator4", "--ic", CIRCLE_IC],  # neither J nor C
    ["integrate", "--equation", "arclength", "--ic", "0,0,0;2,0,0;0,1,0"],  # not unit speed
    ["integrate", "--ic", CIRCLE_IC, "--metric", "no-such-metric"],
    ["integrate", "--config", "/nonexistent/run.json"],
])
def test_input_errors_exit_2(argv, capsys):
    assert run(*argv) == 2
    assert "input error" in capsys.readouterr().err


def test_schema_violation_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"ic": {"x": [0, 0, 0], "U": [1, 0, 0]}, "tol": -1}))
    assert run("integrate", "--config", cfg) == 2
    cfg.write_text("{not json")
    assert run("integrate", "--config", cfg) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        run("integrate", "--equation", "nope")
    assert info.value.code == 2


def test_numerical_failure_exits_1(capsys):
    # a null initial velocity cannot start the conformal geodesic flow
    assert run("integrate", "--ic", "0,0,0;0,0,0;0,1,0") == 1
    assert "numerical failure" in capsys.readouterr().err


def test_bad_default_tolerance_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CONFGEO_DEFAULT_TOL", "tiny")
    assert run("integrate", "--ic", CIRCLE_IC, "--out", tmp_path / "x.csv") == 2
    monkeypatch.setenv("CONFGEO_DEFAULT_TOL", "1e-9")
    assert run("integrate", "--ic", CIRCLE_IC, "--format", "json", "--out", tmp_path / "x.json") == 0
    assert json.loads((tmp_path / "x.json").read_text())["meta"]["tol"] == 1e-9


def test_oracle_families(tmp_path):
    for family, params in (("circle", {}), ("spiral", {"c": 2}), ("loxodrome", {"c": 1.5}),
                           ("special-conformal", {"B": [0, 0.1, 0]})):
        out = tmp_path / f"{family}.csv"
        assert run("oracle", family, "--params", json.dumps(params), "--samples", 5, "--out", out) == 0
        assert len(Trajectory.from_csv(out)) == 5
    out = tmp_path / "c.csv"
    run("oracle", "circle", "--out", out)
    tr = Trajectory.from_csv(out)
    assert np.allclose(tr.x, circle_curve(CircleParams(np.zeros(3), np.eye(3)[0], np.eye(3)[1]))(tr.t), atol=1e-15)
    assert run("oracle", "loxodrome", "--params", '{"R0": [0, 0, 1]}') == 2
    assert run("oracle", "circle", "--params", "[1]") == 2


def report(path):
    return json.loads(path.read_text())


def test_check_first_integrals(tmp_path):
    traj, out = tmp_path / "t.csv", tmp_path / "r.json"
    run("integrate", "--ic", CIRCLE_IC, "--out", traj)
    assert run("check", "--suite", "first-integrals", "--trajectory", traj, "--out", out) == 0
    r = report(out)
    assert r["pass"] and r["checks"][0]["value"] < 1e-6
    assert run("check", "--suite", "first-integrals", "--ic", CIRCLE_IC, "--equation", "mercator4",
               "--c-vector", "0,0,1", "--out", out) == 0
    assert run("check", "--suite", "first-integrals", "--trajectory", traj,
               "--metric", "round-sphere-stereographic", "--out", out) == 2


def test_check_suites(tmp_path):
    out = tmp_path / "r.json"
    assert run("check", "--suite", "invariance", "--out", out) == 0
    assert report(out)["pass"] and report(out)["states"] == 100
    assert run("check", "--suite", "hamiltonian", "--out", out) == 0
    assert run("check", "--suite", "tractor", "--out", out) == 0
    assert run("check", "--suite", "theorem1", "--curve", "spiral", "--pairs", 2, "--out", out) == 0
    assert report(out)["checks"][0]["value"] < 1e-5


def test_check_failure_exits_1(tmp_path):
    traj, out = tmp_path / "t.csv", tmp_path / "r.json"
    # a cg3 trajectory integrated crudely drifts more than an impossible tolerance
    run("integrate", "--ic", CIRCLE_IC, "--method", "rk4", "--step", 0.1, "--out", traj)
    assert run("check", "--suite", "first-integrals", "--trajectory", traj, "--check-tol", 1e-15, "--out", out) == 1
    assert not report(out)["pass"]


def test_vary(tmp_path):
    out = tmp_path / "v.json"
    assert run("vary", "--curve", "spiral", "--field", "trig", "--out", out) == 0
    r = report(out)
    assert r["pass"] and r["rel_error"] < 1e-5
    assert run("vary", "--curve", "circle", "--field", "bump", "--metric", "round-sphere-stereographic", "--out", out) == 0
    assert run("vary", "--field", "polynomial", "--field-params", '{"coeffs": [[0, 0, 1], [0, 1, 0]]}', "--out", out) == 0


def bvp_problem(tmp_path, **extra):
    p = CircleParams(np.zeros(3), np.eye(3)[0], np.eye(3)[1])
    j0, j1 = circle(p, np.array([0.0, 1.0]), order=1)
    cfg = {"x0": j0[0].tolist(), "U0": j0[1].tolist(), "x1": j1[0].tolist(), "U1": j1[1].tolist(), **extra}
    path = tmp_path / "bvp.json"
    path.write_text(json.dumps(cfg))
    return path


def test_bvp_circle(tmp_path, capsys):
    out, trace, rep = tmp_path / "b.csv", tmp_path / "trace.csv", tmp_path / "s.json"
    assert run("bvp", bvp_problem(tmp_path), "--out", out, "--trace", trace, "--report", rep) == 0
    s = report(rep)
    assert s["iterations"] <= 20 and s["residual"] < 1e-8
    assert np.allclose(s["A0"], [0, 2, 0], atol=1e-6)
    assert trace.read_text().startswith("iteration,")
    tr = Trajectory.from_csv(out)
    assert np.allclose(tr.x[-1], [0.5, 0.5, 0], atol=1e-8)


def test_bvp_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"x0\": [0, 0, 0]")
    assert run("bvp", bad) == 2
    bad.write_text(json.dumps({"x0": [0, 0, 0], "U0": [1, 0, 0]}))
    assert run("bvp", bad) == 2
    bad.write_text(json.dumps({"x0": [0, 0], "U0": [1, 0, 0], "x1": [1, 0, 0], "U1": [1, 0, 0]}))
    assert run("bvp", bad) == 2
    # an iteration budget of one cannot converge: reported as a numerical failure
    assert run("bvp", bvp_problem(tmp_path, max_iter=1), "--out", tmp_path / "o.csv") == 1


def test_figure1(tmp_path):
    assert run("figure1", "--out-dir", tmp_path) == 0
    for name in ("red", "blue", "green"):
        assert (tmp_path / f"figure1_{name}.csv").exists()
    r = report(tmp_path / "figure1_report.json")
    assert r["pass"]
    assert r["red"]["circle_fit_deviation"] < 1e-8 and r["blue"]["planarity"] < 1e-8
    assert r["green"]["max_abs_torsion"] > 1e-3
    assert all(r[k]["C_drift"] <= 1e-6 for k in ("red", "blue", "green"))


def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "confgeo.cli", "oracle", "circle", "--samples", "3"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and ok.stdout.startswith("t,x0,x1,x2")
    bad = subprocess.run([sys.executable, "-m", "confgeo.cli", "integrate"], capture_output=True, text=True)
    assert bad.returncode == 2
