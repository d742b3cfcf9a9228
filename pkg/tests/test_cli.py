import json

import pytest

from livsic.cli import RunReport, dumps, emit_plot_data, main, run
from livsic.config import make_config
from livsic.errors import ConfigParse, MissingSeries

ROTATION = {"group": "DiffS1", "kind": "constant", "algebra": {"rot": 0.3}}


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_obstruction_vanishes_for_coboundary(tmp_path, capsys):
    cfg = _write(tmp_path, {"params": {"n_max": 4}})
    assert main(["obstruction", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["reports"]["obstruction"]["verdict"] == "vanishes"
    assert out["exit_code"] == 0


def test_solve_refuses_rotation_generator(tmp_path, capsys):
    cfg = _write(tmp_path, {"generator": ROTATION, "params": {"obstruction_n_max": 3}})
    code = main(["solve", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 3
    err = capsys.readouterr().err
    assert "ObstructionFails" in err
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["warnings"][0]["kind"] == "ObstructionFails"
    assert rep["warnings"][0]["margin"] > 0


def test_identical_runs_are_byte_identical():
    data = {"params": {"n_max": 5}}
    a = run(make_config("obstruction", data, seed=7))
    b = run(make_config("obstruction", data, seed=7))
    assert dumps(a, with_meta=False) == dumps(b, with_meta=False)
    assert "meta" not in json.loads(dumps(a, with_meta=False))


def test_distortion_writes_growth_file(tmp_path):
    N = 10
    cfg = _write(tmp_path, {"system": "diag4", "params": {"N": N, "n_max_per": 3}})
    assert main(["distortion", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "distortion_growth.dat").read_text().splitlines()
    rows = [ln for ln in lines if not ln.startswith("#")]
    assert len(rows) == N
    assert all(len(r.split()) == 2 for r in rows)
    assert (tmp_path / "distortion.csv").exists()


def test_solver_ladder_writes_residual_file(tmp_path):
    cfg = _write(tmp_path, {"params": {"L": [500, 2000], "grid_res": 16}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = [ln for ln in (tmp_path / "residual_vs_coverage.dat").read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 2


def test_missing_series(tmp_path):
    rep = RunReport(config={})
    with pytest.raises(MissingSeries):
        emit_plot_data(rep, "distortion_growth", tmp_path)


def test_config_echo_reproduces(tmp_path):
    rep = run(make_config("orbits", {"params": {"n_max": 4}}, seed=3), tmp_path)
    echoed = json.loads((tmp_path / "report.json").read_text())["config"]
    command = echoed.pop("command")
    again = run(make_config(command, echoed))
    assert dumps(again, with_meta=False) == dumps(rep, with_meta=False)


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, {"bogus": 1})
    assert main(["orbits", "--config", cfg]) == ConfigParse.exit_code == 2
    assert "ConfigParse" in capsys.readouterr().err


def test_unparseable_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["orbits", "--config", str(p)]) == 2


def test_yaml_config(tmp_path, capsys):
    p = tmp_path / "cfg.yaml"
    p.write_text("params:\n  n_max: 3\n")
    assert main(["orbits", "--config", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["params"]["n_max"] == 3


def test_proptest_command(capsys):
    assert main(["proptest", "--seed", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["reports"]["proptest"]["passed"] is True
