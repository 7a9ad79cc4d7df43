"""End-to-end runs of main.py and its exit codes"""

import json
import os

import numpy as np
import pytest

from main import main
from src.potentials.grid import GridFunction


def run(command, tmp_path, *extra, name="out"):
    out = str(tmp_path / name)
    code = main([command, "--out", out, *extra])
    return code, out


def load_report(out):
    with open(os.path.join(out, "report.json"), "r", encoding="utf-8") as handle:
        return json.load(handle)


def read_rows(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


# ---------------- polytope / soliton-vector ----------------
def test_polytope(tmp_path, data_dir):
    code, out = run("polytope", tmp_path, "--input", os.path.join(data_dir, "flagship_fan.json"))
    assert code == 0
    results = load_report(out)["results"]
    assert sorted(results["vertices"]) == [["-1", "0"], ["-1", "1"], ["0", "-1"]]
    assert results["delzant"] is True
    assert results["recession_rays"] == [[1, 0]]


def test_soliton_vector_flagship(tmp_path, data_dir):
    code, out = run("soliton-vector", tmp_path, "--input", os.path.join(data_dir, "flagship_fan.json"))
    assert code == 0
    b1, b2 = (float(v) for v in load_report(out)["results"]["b_X"])
    assert b1 == pytest.approx(1.28, abs=0.02)
    assert b2 == pytest.approx(0.64, abs=0.01)
    trace = read_rows(os.path.join(out, "soliton_trace.csv"))
    assert trace.shape[1] == 6
    assert trace[-1, 1] == pytest.approx(b1, abs=1e-12)


@pytest.mark.parametrize("name, expected", [("half_line.json", [1.0]), ("square.json", [0.0, 0.0])])
def test_soliton_vector_presets(tmp_path, data_dir, name, expected):
    code, out = run("soliton-vector", tmp_path, "--input", os.path.join(data_dir, name))
    assert code == 0
    b_X = [float(v) for v in load_report(out)["results"]["b_X"]]
    assert np.allclose(b_X, expected, atol=1e-8)


def test_reports_are_deterministic(tmp_path, data_dir):
    flagship = os.path.join(data_dir, "flagship_fan.json")
    _, first = run("soliton-vector", tmp_path, "--input", flagship, name="first")
    _, second = run("soliton-vector", tmp_path, "--input", flagship, name="second")
    with open(os.path.join(first, "report.json"), "rb") as a, open(os.path.join(second, "report.json"), "rb") as b:
        assert a.read() == b.read()


# ---------------- verify ----------------
@pytest.mark.parametrize("case", ["gaussian_xi", "gaussian_polytope", "brion_vs_oracle", "legendre_involution"])
def test_verify_suites_pass(tmp_path, case):
    code, out = run("verify", tmp_path, "--case", case)
    assert code == 0
    report = load_report(out)
    assert report["passed"] is True
    assert report["checks"]


def test_usage_errors(tmp_path):
    assert run("verify", tmp_path)[0] == 64
    assert main(["explode", "--out", str(tmp_path)]) == 64
    assert run("polytope", tmp_path)[0] == 64
    assert run("polytope", tmp_path, "--input", str(tmp_path / "missing.json"))[0] == 64


def test_geometry_error_exit_codes(tmp_path, data_dir):
    bad_fan = tmp_path / "fan.json"
    bad_fan.write_text(json.dumps({"dim": 2, "rays": [[2, 0], [0, 1]], "max_cones": [[0, 1]]}))
    assert run("polytope", tmp_path, "--input", str(bad_fan))[0] == 64
    # The origin is a vertex of the unit simplex, not an interior point
    assert run("soliton-vector", tmp_path, "--input", os.path.join(data_dir, "unit_simplex.json"))[0] == 1


# ---------------- continuity ----------------
def test_default_continuity(tmp_path, data_dir):
    code, out = run("continuity", tmp_path, "--input", os.path.join(data_dir, "continuity_gaussian.json"))
    assert code == 0
    rows = read_rows(os.path.join(out, "continuity_path.csv"))
    assert rows.shape[0] == 20
    assert rows[-1, 0] == 1.0
    results = load_report(out)["results"]
    assert float(results["conservation_drift"]) < 1e-8
    assert float(results["I_minus_J"]) >= -1e-10
    assert all(results["monitors_bounded"].values())


def test_single_step_zero_bump(tmp_path):
    run_file = tmp_path / "zero.json"
    run_file.write_text(json.dumps({"model": "gaussian", "dim": 1, "bump": {"amplitude": 0.0}, "steps": 1}))
    code, out = run("continuity", tmp_path, "--input", str(run_file))
    assert code == 0
    assert read_rows(os.path.join(out, "continuity_path.csv")).shape[0] == 1
    psi = GridFunction.from_csv(os.path.join(out, "psi_final.csv"))
    assert np.abs(psi.values).max() < 1e-8


def test_oversized_bump_fails(tmp_path, data_dir):
    code, out = run("continuity", tmp_path, "--input", os.path.join(data_dir, "continuity_oversized.json"),
                    "--steps", "4", "--grid-h", "0.05", "--grid-span", "-4", "3")
    assert code == 3
    report = load_report(out)
    assert report["passed"] is False
    assert report["checks"]["reached_s1"]["passed"] is False
    results = report["results"]
    assert results["failure"] in ("PositivityLoss", "NewtonDiverged")
    assert float(results["last_good_s"]) < 1.0


def test_bad_run_keys(tmp_path):
    run_file = tmp_path / "bad.json"
    run_file.write_text(json.dumps({"model": "gaussian", "colour": "blue"}))
    assert run("continuity", tmp_path, "--input", str(run_file))[0] == 64


# ---------------- fhat ----------------
def test_fhat(tmp_path, data_dir):
    code, out = run("fhat", tmp_path, "--input", os.path.join(data_dir, "fhat_flagship.json"))
    assert code == 0
    report = load_report(out)
    assert float(report["results"]["Fhat"]) > 0
    assert report["checks"]["u1_convex"]["passed"] is True
