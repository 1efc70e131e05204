import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tensionlab.cli import main
from tensionlab.field import ComplexField, GridSpec
from tensionlab.metric import builtin_metric
from tensionlab.records import MapRecord, read_record, write_record

from conftest import peaked_control

LINEAR_GRID = "-1,-1,17,17,0.125"
STRIP_64 = "0.5,0,129,65,0.015625"


def run(*argv):
    return main([str(a) for a in argv])


def rows(text):
    return list(csv.reader(io.StringIO(text)))


# --- solve -------------------------------------------------------------------------

def test_solve_linear_euclid(tmp_path):
    out = tmp_path / "lin.json"
    assert run("solve", "--metric", "euclid", "--grid", LINEAR_GRID, "--boundary-from", "linear",
               "--out", out) == 0
    rec = read_record(str(out))
    Z = rec.f.grid.points()
    assert np.max(np.abs(rec.f.values - (2 * Z - 0.5 * np.conj(Z)))) <= 1e-10


def test_solve_tanh_then_audit(tmp_path):
    out, rep = tmp_path / "tanh.json", tmp_path / "rep.json"
    assert run("solve", "--metric", "exp_x", "--grid", STRIP_64, "--boundary-from", "tanh",
               "--method", "newton", "--out", out) == 0
    assert run("audit", "--in", out, "--out", rep) == 0
    report = json.loads(rep.read_text())
    assert report["passed"]
    assert {c["verdict"] for c in report["checks"]} == {"pass"}


def test_solve_nonconverged_still_writes(tmp_path):
    out = tmp_path / "nc.json"
    assert run("solve", "--metric", "exp_x", "--grid", "0.5,0,33,17,0.0625", "--boundary-from", "tanh",
               "--max-iters", 2, "--out", out) == 2
    assert out.exists()


def test_solve_grid_too_small(tmp_path, capsys):
    assert run("solve", "--metric", "euclid", "--grid", "0,0,2,5,0.1", "--boundary-from", "identity",
               "--out", tmp_path / "x.json") == 1
    assert "grid-too-small" in capsys.readouterr().err


@pytest.mark.parametrize("argv, flag", [
    (["--grid", "0,0,5"], "--grid"),
    (["--grid", "0,0,5,5,0.1", "--tol", "-1"], "--tol"),
])
def test_solve_malformed_flags_are_named(tmp_path, capsys, argv, flag):
    assert run("solve", "--metric", "euclid", "--boundary-from", "identity",
               "--out", tmp_path / "x.json", *argv) == 1
    assert flag in capsys.readouterr().err


def test_unknown_metric_and_missing_flags(tmp_path):
    assert run("solve", "--metric", "nope", "--grid", LINEAR_GRID, "--boundary-from", "identity",
               "--out", tmp_path / "x.json") == 1
    assert run("construct", "--alpha", "0.3,0") == 1


def test_theta_metric(tmp_path):
    out = tmp_path / "t.json"
    assert run("solve", "--theta", "1", "--grid", "0.5,0,33,17,0.0625", "--boundary-from", "tanh",
               "--method", "newton", "--out", out) == 0
    assert read_record(str(out)).metric.coeffs == (0j, 2 + 0j)


# --- construct ----------------------------------------------------------------------

def test_construct_identity(tmp_path):
    out = tmp_path / "id.json"
    assert run("construct", "--alpha", "0,0", "--metric", "euclid", "--grid", LINEAR_GRID, "--out", out) == 0
    rec = read_record(str(out))
    assert rec.alpha == 0
    assert np.max(np.abs(rec.f.values - rec.f.grid.points())[rec.f.valid]) <= 1e-8


def test_construct_member_passes_audit(tmp_path):
    out, rep = tmp_path / "m.json", tmp_path / "r.json"
    assert run("construct", "--alpha", "0.3,0", "--metric", "exp_x", "--grid", "-1,-1,33,33,0.0625",
               "--out", out) == 0
    run("audit", "--in", out, "--out", rep)
    checks = {c["name"]: c for c in json.loads(rep.read_text())["checks"]}
    assert checks["mu_modulus_spread"]["verdict"] == "pass"
    assert checks["pushforward_family"]["verdict"] == "pass"


@pytest.mark.parametrize("argv, msg", [
    (["--alpha", "1.2,0", "--metric", "euclid"], "alpha"),
    (["--alpha", "0.3,0", "--metric", "gauss_nonflat"], "not-flat"),
])
def test_construct_errors(tmp_path, capsys, argv, msg):
    assert run("construct", "--grid", LINEAR_GRID, "--out", tmp_path / "x.json", *argv) == 1
    assert msg in capsys.readouterr().err


def test_negative_alpha_is_parsed(tmp_path):
    out = tmp_path / "n.json"
    assert run("construct", "--alpha", "-0.2,0.4", "--metric", "euclid", "--grid", LINEAR_GRID,
               "--out", out) == 0
    assert read_record(str(out)).alpha == -0.2 + 0.4j


# --- audit ----------------------------------------------------------------------------

def _write(tmp_path, name, fn, metric="euclid", grid=None):
    g = grid or GridSpec.from_bounds(-1, 1, -1, 1, 1 / 16)
    p = tmp_path / name
    write_record(MapRecord(ComplexField.sample(g, fn), builtin_metric(metric), name=name), str(p))
    return p


def test_audit_control_fails(tmp_path):
    p = _write(tmp_path, "ctrl.json", peaked_control)
    rep = tmp_path / "r.json"
    assert run("audit", "--in", p, "--out", rep) == 3
    checks = {c["name"]: c for c in json.loads(rep.read_text())["checks"]}
    assert checks["lemma1"]["verdict"] == "fail"


def test_audit_conformal_map_lemma1_not_applicable(tmp_path):
    p = _write(tmp_path, "id.json", lambda z: z)
    rep = tmp_path / "r.json"
    assert run("audit", "--in", p, "--out", rep) == 0
    checks = {c["name"]: c for c in json.loads(rep.read_text())["checks"]}
    assert checks["lemma1"]["verdict"] == "not-applicable"


def test_audit_refine_reports_ratios(tmp_path):
    # refinement re-solves, so the record must itself be a discrete solution
    p, rep = tmp_path / "tanh.json", tmp_path / "r.json"
    assert run("solve", "--metric", "exp_x", "--grid", "0.5,0,65,33,0.03125", "--boundary-from", "tanh",
               "--method", "newton", "--out", p) == 0
    assert run("audit", "--in", p, "--refine", "--out", rep) == 0
    checks = {c["name"]: c for c in json.loads(rep.read_text())["checks"]}
    for name in ("hopf_holomorphy", "lemma1", "lemma2", "lemma3", "companion_distortion"):
        assert 3 <= checks[name]["refinement_ratio"] <= 5
    assert "refinement_ratio" not in checks["max_principle"]
    assert "refinement_ratio" not in checks["tension"]


def test_audit_tolerance_flag(tmp_path):
    g = GridSpec.from_bounds(0.5, 2.5, 0, 1, 1 / 32)
    p = _write(tmp_path, "tanh.json", lambda z: np.log(np.cosh(z.real)) + 1j * z.imag, "exp_x", g)
    assert run("audit", "--in", p, "--tol-lemma1", "1e-6") == 3


def test_audit_unreadable(tmp_path):
    assert run("audit", "--in", tmp_path / "missing.json") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    assert run("audit", "--in", bad) == 1


# --- distance ---------------------------------------------------------------------------

def test_distance_log3(tmp_path):
    a = _write(tmp_path, "a2.json", lambda z: 2 * z - np.conj(z))
    b = _write(tmp_path, "a1.json", lambda z: z)
    out = tmp_path / "d.csv"
    assert run("distance", "--in", f"{a},{b}", "--out", out) == 0
    r = rows(out.read_text())
    assert r[0] == ["quantity", "record", "a2.json", "a1.json"]
    assert abs(float(r[1][3]) - math.log(3)) <= 1e-12


def test_distance_identical_files(tmp_path):
    a = _write(tmp_path, "a.json", lambda z: 2 * z - 0.5 * np.conj(z))
    out = tmp_path / "d.csv"
    assert run("distance", "--in", f"{a},{a}", "--out", out) == 0
    assert float(rows(out.read_text())[1][3]) == 0.0


def test_distance_grid_mismatch(tmp_path, capsys):
    a = _write(tmp_path, "a.json", lambda z: z)
    b = _write(tmp_path, "b.json", lambda z: z, grid=GridSpec.from_bounds(-1, 1, -1, 1, 1 / 8))
    assert run("distance", "--in", f"{a},{b}") == 1
    assert "grid-mismatch" in capsys.readouterr().err


def test_distance_exp_x_members(tmp_path):
    paths = []
    for k, a in enumerate(["0,0", "0.3,0", "-0.2,0.4"]):
        p = tmp_path / f"m{k}.json"
        assert run("construct", "--alpha", a, "--metric", "exp_x", "--grid", "-1,-1,65,65,0.03125",
                   "--out", p) == 0
        paths.append(str(p))
    out = tmp_path / "d.csv"
    assert run("distance", "--in", ",".join(paths), "--out", out) == 0
    last = rows(out.read_text())[-1]
    assert last[0] == "max_discrepancy"
    assert float(last[2]) <= 2e-2


# --- example51 ----------------------------------------------------------------------

def test_example51_table(tmp_path):
    out, summ = tmp_path / "e.csv", tmp_path / "s.json"
    assert run("example51", "--c", 1, "--variant", "paper", "--out", out, "--summary", summ) == 0
    r = rows(out.read_text())
    head = r[0]
    table = {float(row[0]): dict(zip(head, map(float, row))) for row in r[1:]}
    assert table[0.0]["mu"] == pytest.approx(-0.2679492, abs=1e-7)
    assert table[0.0]["uprime"] == pytest.approx(0.5773503, abs=1e-7)
    assert 0.99 <= table[-20.0]["ratio_uprime_to_1"] <= 1.01
    assert 0.99 <= table[40.0]["ratio_uprime_to_sqrt_t_over_2"] <= 1.01
    s = json.loads(summ.read_text())
    assert s["sup_u_bound"] == pytest.approx(1.3169578969, abs=1e-9)


def test_example51_corrected_nu_column(tmp_path):
    out = tmp_path / "e.csv"
    assert run("example51", "--variant", "corrected", "--xrange", "-5,5,11", "--out", out) == 0
    r = rows(out.read_text())
    col = r[0].index("nu_residual")
    assert max(abs(float(row[col])) for row in r[1:]) <= 1e-12


@pytest.mark.parametrize("c", ["0", "-1"])
def test_example51_rejects_nonpositive_c(c):
    assert run("example51", "--c", c) == 1


def test_example51_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("example51", "--out", a)
    run("example51", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_console_script_runs(tmp_path):
    out = tmp_path / "e.csv"
    proc = subprocess.run([sys.executable, "-m", "tensionlab.cli", "example51", "--xrange", "-1,1,3",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("x,mu,uprime,u,")
