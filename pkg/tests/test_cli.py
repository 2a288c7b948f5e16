import json
import subprocess
import sys

import pytest

from loclab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def test_moments_stdout(capsys):
    assert main(["moments", "--model", "gaussian(2)", "--theta", "1,0", "--t", "1"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["barycenter"] == pytest.approx([0.5, 0.0], abs=1e-14)
    assert doc["covariance_diagonal"] == pytest.approx([0.5, 0.5], rel=1e-14)


def test_potential_writes_certificate_file(tmp_path):
    out = tmp_path / "cert.json"
    assert main(["potential", "--d0", "10", "--r0", "2.5", "--grid", "2000", "--out", str(out)]) == EXIT_OK
    cert = json.loads(out.read_text())
    assert cert["passed"] and 0.05 <= cert["b"] <= 0.2
    for key in ("D0", "r0", "bridge_coefficients", "min_curvature_slack", "junction_residuals"):
        assert key in cert


def test_potential_bad_r0_is_usage_error():
    assert main(["potential", "--d0", "10", "--r0", "5"]) == EXIT_USAGE


def test_ladder_pass_and_regime(capsys):
    assert main(["ladder", "--log-p", "125", "--log-log-n", "1e27"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["k0"] == 3 and doc["branch"] == "multi_stage"
    assert main(["ladder", "--p", "1000", "--log-n", "100"]) == EXIT_FAIL


def test_ladder_needs_one_p_form():
    assert main(["ladder", "--p", "1000", "--log-p", "3", "--log-n", "100"]) == EXIT_USAGE


def test_unknown_suite_and_command():
    assert main(["verify", "--suite", "bogus"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    assert main(["verify", "--suite", "gaussian-oracle", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["verify", "--suite", "gaussian-oracle", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_simulate_writes_outputs(tmp_path):
    rc = main(["simulate", "--model", "product(uniform*2)", "--t", "0.1,0.2", "--n-paths", "20",
               "--seed", "4", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    for name in ("spectra.csv", "summary.json", "report.txt"):
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["config"]["seed"] == 4


def test_report_outputs(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("models = gaussian(2)\ntimes = 0.1\nn_paths = 8\nc = 1\nC = 6\nbeta = 2\n")
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert "moment_conjecture" in doc["bound_curves_log10"]["gaussian(2)@0.1"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "loclab.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("loclab")
