"""
命令行：参数校验、输出文件与基准值登记表
"""

import json

import pytest
from click.testing import CliRunner

from src.cli.commands import COMMANDS, cli
from src.utils.io import read_csv, read_csv_metadata, read_json


@pytest.fixture
def runner():
    return CliRunner()


def test_commands_registered():
    assert set(COMMANDS) <= set(cli.commands)


def test_empty_invocation_shows_help(runner):
    result = runner.invoke(cli, [])
    assert result.exit_code == 2
    assert "potential" in result.output


def test_even_lattice_is_rejected(runner, tmp_path):
    result = runner.invoke(cli, ["potential", "--L", "4", "--R", "1", "--output-dir", str(tmp_path)])
    assert result.exit_code == 1
    assert "domain_error" in result.output
    assert not (tmp_path / "potential" / "report.json").exists()


def test_unknown_cutoff_is_rejected(runner, tmp_path):
    result = runner.invoke(cli, ["covariance", "--cutoff", "lorentz", "--output-dir", str(tmp_path)])
    assert result.exit_code == 1
    assert "domain_error" in result.output


def test_potential_writes_outputs(runner, tmp_path):
    result = runner.invoke(cli, ["potential", "--L", "3", "--R", "1", "--mass", "0.5", "--output-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = read_json(tmp_path / "potential" / "report.json")
    assert report["command"] == "potential"
    assert report["passed"] is True
    assert report["config"]["L"] == 3
    assert set(report["values"]) == {"W10", "W0_yukawa", "zero_mode_sum"}
    frame = read_csv(tmp_path / "potential" / "potential.csv")
    assert list(frame.columns) == ["x0", "x1", "W_coulomb", "W_yukawa"]
    assert len(frame) == 9
    meta = read_csv_metadata(tmp_path / "potential" / "potential.csv")
    assert meta["command"] == "potential"
    assert meta["config"]["mass"] == 0.5


def test_bless_then_compare(runner, tmp_path):
    args = ["potential", "--L", "3", "--R", "2", "--mass", "0.3", "--output-dir", str(tmp_path)]
    blessed = runner.invoke(cli, args + ["--bless"])
    assert blessed.exit_code == 0, blessed.output
    assert read_json(tmp_path / "potential" / "report.json")["golden"]["status"] == "blessed"
    compared = runner.invoke(cli, args)
    assert compared.exit_code == 0, compared.output
    golden = read_json(tmp_path / "potential" / "report.json")["golden"]
    assert golden["status"] == "ok"
    assert all(d == 0.0 for d in golden["drift"].values())


def test_phase_diagram_from_config_file(runner, tmp_path):
    config = tmp_path / "run.env"
    config.write_text("ell_end=1.0\nstep=0.01\ns_values=0.01,0.03\nz_values=0.002\nrecord_every=10\n", encoding="utf-8")
    result = runner.invoke(cli, ["phase-diagram", "--config", str(config), "--output-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = read_json(tmp_path / "phase-diagram" / "report.json")
    assert report["orbits"] == 3
    assert report["config"]["extra"]["s_values"] == "0.01,0.03"
    assert report["invariant_drift"] < 1e-12
    orbits = read_csv(tmp_path / "phase-diagram" / "orbits.csv")
    assert set(orbits["orbit"]) == {0, 1, 2}
    assert orbits[orbits["orbit"] == 2]["separatrix"].all()


def test_command_line_overrides_config_file(runner, tmp_path):
    config = tmp_path / "run.env"
    config.write_text("L=5\nR=1\nmass=0.5\n", encoding="utf-8")
    result = runner.invoke(cli, ["potential", "--config", str(config), "--L", "3", "--output-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = read_json(tmp_path / "potential" / "report.json")
    assert report["config"]["L"] == 3
    assert report["config"]["mass"] == 0.5


def test_report_is_sorted_json(runner, tmp_path):
    runner.invoke(cli, ["potential", "--L", "3", "--R", "1", "--mass", "1.0", "--output-dir", str(tmp_path)])
    text = (tmp_path / "potential" / "report.json").read_text(encoding="utf-8")
    payload = json.loads(text)
    assert list(payload) == sorted(payload)
