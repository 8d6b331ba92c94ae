import csv
import json

import pytest
import yaml

from eplab.src import cli
from eplab.src.diagnostics import Check
from eplab.src.suites import SUITES

from tests.test_output import PHASEPLANE

@pytest.fixture
def phaseplane_yaml(tmp_path):
    path = tmp_path / "pp.yaml"
    path.write_text(yaml.safe_dump(PHASEPLANE), encoding="utf-8")
    return path

def test_run_phaseplane(tmp_path, phaseplane_yaml):
    out = tmp_path / "out"
    assert cli.main(["run", str(phaseplane_yaml), "-o", str(out)]) == cli.EXIT_OK
    assert (out / "summary.json").exists()
    assert (out / "trajectory.csv").exists()

def test_run_blowup_exit_code(tmp_path):
    path = tmp_path / "blow.yaml"
    path.write_text(yaml.safe_dump(PHASEPLANE | {"phase": {"w0": -10.0, "s0": 1.0}}), encoding="utf-8")
    assert cli.main(["run", str(path), "-o", str(tmp_path / "out")]) == cli.EXIT_BLOWUP
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary["status"] == "blowup"

def test_run_invalid_config(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("kind: pde\nnu: 1.0\ngrid: 63\n", encoding="utf-8")
    assert cli.main(["run", str(path)]) == cli.EXIT_USAGE
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == cli.EXIT_USAGE

def test_run_unsupported_variant(tmp_path):
    path = tmp_path / "ion.yaml"
    path.write_text(yaml.safe_dump(PHASEPLANE | {"background": {"kind": "boltzmann"}}), encoding="utf-8")
    assert cli.main(["run", str(path), "-o", str(tmp_path / "out")]) == cli.EXIT_USAGE

def test_run_solver_error_writes_summary(tmp_path):
    path = tmp_path / "cfl.yaml"
    path.write_text(yaml.safe_dump(PHASEPLANE | {"dt": 0.5}), encoding="utf-8")
    assert cli.main(["run", str(path), "-o", str(tmp_path / "out")]) == cli.EXIT_SOLVER
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary["status"] == "error"

def test_usage_errors():
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["verify", "nope"]) == cli.EXIT_USAGE
    assert cli.main(["--jobs", "0", "verify", "poisson"]) == cli.EXIT_USAGE

def test_verify_reports_table_and_json(monkeypatch, capsys):
    monkeypatch.setitem(SUITES, "fake", lambda: [Check("always", True, 1.0, "ok")])
    assert cli.main(["verify", "fake"]) == cli.EXIT_OK
    last = capsys.readouterr().out.strip().splitlines()[-1]
    report = json.loads(last)
    assert report["passed"] is True
    assert report["suites"]["fake"]["always"]["margin"] == 1.0

def test_verify_failure_exit_code(monkeypatch):
    monkeypatch.setitem(SUITES, "fake", lambda: [Check("never", False, -1.0)])
    assert cli.main(["verify", "fake"]) == cli.EXIT_SOLVER

def test_sweep(tmp_path, phaseplane_yaml):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", str(phaseplane_yaml), "--param", "nu", "--values", "1,2", "-o", str(out)]) == cli.EXIT_OK
    with open(out / "rates.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [row["value"] for row in rows] == ["1.0", "2.0"]
    assert all(row["status"] == "ok" for row in rows)

def test_sweep_argument_errors(phaseplane_yaml):
    assert cli.main(["sweep", str(phaseplane_yaml), "--param", "grid", "--values", "1"]) == cli.EXIT_USAGE
    assert cli.main(["sweep", str(phaseplane_yaml), "--param", "nu", "--values", "a,b"]) == cli.EXIT_USAGE
    assert cli.main(["sweep", str(phaseplane_yaml), "--param", "nu", "--values", ","]) == cli.EXIT_USAGE
