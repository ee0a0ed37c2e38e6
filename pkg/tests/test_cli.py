from __future__ import annotations

import csv
import io
import json

import pytest

from cpbipolar.cli import SCENARIOS, ExperimentConfig, main, run_scenario
from cpbipolar.errors import InvalidInput
from cpbipolar.serialize import deserialize, serialize


def strip_wall_time(text: str) -> str:
    doc = json.loads(text)
    doc.pop("wall_time")
    return json.dumps(doc, sort_keys=True)


@pytest.mark.parametrize("scenario", sorted(SCENARIOS))
def test_every_scenario_passes_and_is_deterministic(scenario):
    trials = 3 if scenario == "polar-properties" else 4
    cfg = ExperimentConfig(scenario, seed=7, trials=trials)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.fail_count == 0 and a.pass_count == trials
    assert a.pass_count + a.fail_count == len(a.records)
    assert strip_wall_time(serialize(a)) == strip_wall_time(serialize(b))


def test_seed_changes_records():
    a = run_scenario(ExperimentConfig("jamiolkowski", seed=1, trials=2))
    b = run_scenario(ExperimentConfig("jamiolkowski", seed=2, trials=2))
    assert a.records != b.records


def test_identities_example():
    report = run_scenario(ExperimentConfig("verify-identities", seed=42, trials=200))
    assert report.fail_count == 0


def test_bipolar_example_has_outside_certificate():
    report = run_scenario(ExperimentConfig("bipolar-roundtrip", trials=1))
    rec = report.records[0]
    assert rec["verdict"] == "OUTSIDE" and rec["problems"] == []
    assert rec["metrics"]["sat_sup_upper"] <= 1.0
    assert rec["metrics"]["value_at_target"] >= 1.01
    assert rec["certificate"]["generators"][0]["m"] == 2


def test_bipolar_rectangular_dims():
    report = run_scenario(ExperimentConfig("bipolar-roundtrip", dims=(2, 1), trials=3))
    assert report.fail_count == 0


def test_scalar_case_example():
    report = run_scenario(ExperimentConfig("scalar-case", trials=1, params={"K": [2]}))
    m = report.records[0]["metrics"]
    assert (m["interval_lo"], m["interval_hi"]) == (-0.5, 0.5)
    assert m["double_polar_hi"] == 2.0
    assert abs(m["grid_hi"] - 0.5) <= 1e-4


def test_config_validation():
    with pytest.raises(InvalidInput):
        ExperimentConfig("nope")
    with pytest.raises(InvalidInput):
        ExperimentConfig("tracial", dims=(5, 2))
    with pytest.raises(InvalidInput):
        ExperimentConfig("tracial", trials=0)
    with pytest.raises(InvalidInput):
        ExperimentConfig("tracial", seed=-1)
    with pytest.raises(InvalidInput):
        ExperimentConfig("tracial", tolerances={"bogus": 1.0})
    assert ExperimentConfig("scalar-target", dims=(3, 3)).dims == (3, 1)
    assert ExperimentConfig("scalar-domain", dims=(3, 3)).dims == (1, 3)
    assert ExperimentConfig("tracial", tolerances={"eps": 1e-5}).tolerances["reduction"] == 1e-11


def test_main_writes_report_and_csv(tmp_path, capsys):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    code = main(["--scenario", "tomography", "--trials", "3", "--seed", "5",
                 "--out", str(out), "--csv", str(table)])
    assert code == 0
    report = deserialize(out.read_text())
    assert report.pass_count == 3 and report.config["seed"] == 5
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["trial", "status", "error"] and len(rows) == 4
    assert "3 passed" in capsys.readouterr().err


def test_config_from_stdin_and_flag_override(monkeypatch, capsys):
    cfg = {"scenario": "jamiolkowski", "seed": 3, "trials": 2, "dims": [1, 3]}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(cfg)))
    assert main(["--config", "-", "--trials", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["trials"] == 4 and doc["config"]["seed"] == 3
    assert doc["config"]["dims"] == [1, 3] and len(doc["records"]) == 4


def test_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario": "scalar-case", "params": {"K": [1, 3]}, "trials": 1}))
    assert main(["--config", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["records"][0]["metrics"]["interval_hi"] == pytest.approx(1 / 3)


def test_failures_give_nonzero_exit(monkeypatch, capsys):
    # an impossible tolerance makes every trial fail
    cfg = json.dumps({"scenario": "tomography", "trials": 2, "tolerances": {"tomography": -1.0}})
    monkeypatch.setattr("sys.stdin", io.StringIO(cfg))
    assert main(["--config", "-"]) == 1
    assert "2 failed" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["--scenario", "nope"], ["--config", "/nonexistent.json"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_unknown_config_field(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario": "tracial", "colour": "red"}))
    with pytest.raises(SystemExit):
        main(["--config", str(path)])


def test_unwritable_output(tmp_path, capsys):
    code = main(["--scenario", "tracial", "--trials", "1", "--out", str(tmp_path / "missing" / "r.json")])
    assert code == 3
    assert "cannot write" in capsys.readouterr().err
