import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from spapprox import __version__
from spapprox.cli import format_cell, run

FIXTURES = Path(__file__).parent / "fixtures"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_fixture(name, out, *extra):
    cfg = FIXTURES / f"{name}.yaml"
    cmd = yaml.safe_load(cfg.read_text())["command"]
    return run([*cmd, "--config", str(cfg), "--out", str(out), *extra])


def test_charseq_harmonic(tmp_path):
    assert run_fixture("charseq", tmp_path) == 0
    rows = read_csv(tmp_path / "charseq.csv")
    assert [float(r["epsilon"]) for r in rows] == [1 / n for n in range(1, 9)]
    assert [int(r["delta"]) for r in rows] == list(range(1, 9))


def test_nterm_geometric(tmp_path):
    assert run_fixture("nterm", tmp_path) == 0
    first = read_csv(tmp_path / "extremal_nterm.csv")[0]
    assert float(first["value"]) == pytest.approx(1 / 6, rel=1e-14)
    assert first["s_star"] == "2"


def test_unit_system_witness(tmp_path):
    assert run_fixture("nterm_unit", tmp_path) == 0
    for row in read_csv(tmp_path / "extremal_nterm.csv"):
        n = int(row["n"])
        # p = 2, q = 1: the maximiser of (s - n)/s^2 is 2n
        assert int(row["s_star"]) in (2 * n, 2 * n + 1)


def test_jackson_In_lambda_one(tmp_path):
    assert run(["jackson", "In", "--set", "lambda=1", "--set", "n=1..3", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "jackson_In.csv")
    assert all(float(r["value"]) == pytest.approx(2.0, rel=1e-14) for r in rows)
    assert rows[0]["closed_form"] == "2.0"


def test_manifest_contents(tmp_path):
    assert run_fixture("gamma", tmp_path, "--seed", "7") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["command"] == "extremal gamma"
    assert manifest["seed"] == 7
    assert len(manifest["config-hash"]) == 64
    assert "jobs" not in manifest and "tolerances" in manifest
    again = tmp_path / "again"
    run_fixture("gamma", again, "--seed", "7")
    assert (again / "manifest.json").read_bytes() == (tmp_path / "manifest.json").read_bytes()


def test_set_overrides_change_hash(tmp_path):
    run_fixture("count", tmp_path / "a")
    run_fixture("count", tmp_path / "b", "--set", "d=2")
    ha = json.loads((tmp_path / "a" / "manifest.json").read_text())["config-hash"]
    hb = json.loads((tmp_path / "b" / "manifest.json").read_text())["config-hash"]
    assert ha != hb
    rows = read_csv(tmp_path / "b" / "count.csv")
    assert rows[3]["V_m"] == str(2 * 3 * 3 + 2 * 3 + 1)  # |k|_1 <= 3 in Z^2: 2m^2 + 2m + 1


def test_json_and_plot(tmp_path):
    assert run_fixture("widths", tmp_path, "--format", "json", "--plot") == 0
    data = json.loads((tmp_path / "extremal_widths.json").read_text())
    assert len(data) == 20 and set(data[0]) == {"n", "value"}
    svg = (tmp_path / "extremal_widths.svg").read_bytes()
    assert svg.startswith(b"<?xml")
    run_fixture("widths", tmp_path / "second", "--format", "json", "--plot")
    assert (tmp_path / "second" / "extremal_widths.svg").read_bytes() == svg


def test_errors_exit_nonzero(tmp_path, capsys):
    assert run(["nope", "--out", str(tmp_path)]) == 2
    assert "DescriptorError" in capsys.readouterr().err
    assert run(["extremal", "nope", "--out", str(tmp_path)]) == 2
    assert run(["extremal", "nterm", "--out", str(tmp_path)]) == 2  # no system
    bad = tmp_path / "bad.yaml"
    # p = 1 < q = 2 needs sum psi_k^2 < inf, which fails for k^-0.4
    bad.write_text("system: {mode: sequence, rule: {family: power, r: 0.4}}\nparams: {n: 1, p: 1, q: 2}\n")
    assert run(["extremal", "nterm", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "DivergentTail" in capsys.readouterr().err


def test_cell_format():
    assert format_cell(0.1) == "0.1"
    assert format_cell(True) == "true"
    assert format_cell(None) == ""
    assert format_cell(float("inf")) == "inf"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spapprox.cli", "charseq", "--config",
                           str(FIXTURES / "charseq.yaml"), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "charseq.csv").exists()
