import csv
import json
import shutil

import pytest

from cli import cli_main
from lab_store import get_default_store
from settings import FIXTURES_DIR

TINY_STUDY = {
    "agents": {"all": {"maxIterations": 2, "maxDepth": 1, "playoutHorizon": 5, "decisionPeriod": 25}},
    "engine": {"maxTicks": 120},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "study.json"
    path.write_text(json.dumps(TINY_STUDY))
    return str(path)


@pytest.fixture
def revenger_path():
    return str(FIXTURES_DIR / "revenger.json")


def test_validate_fixture(revenger_path, capsys):
    assert cli_main(["validate", revenger_path]) == 0
    assert "ok (Revenger)" in capsys.readouterr().out


def test_validate_reports_bad_files(tmp_path, revenger_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"cost": 1, "hp": 0, "damage": 1, "range": 1, "moveTime": 5, "attackTime": 3,
                               "cause": 1, "effect": 1}))
    assert cli_main(["validate", revenger_path, str(bad)]) == 1
    err = capsys.readouterr().err
    assert "INVALID" in err and "hp" in err


def test_usage_errors_exit_with_two():
    assert cli_main([]) == 2
    assert cli_main(["conquer"]) == 2
    assert cli_main(["matchup", "--unit", "x.json", "--mode", "solo"]) == 2


def test_describe(capsys):
    assert cli_main(["describe", str(FIXTURES_DIR / "chopper.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Chopper: cost 2")
    assert "When it takes damage" in out


def test_missing_files_exit_with_one(tmp_path, tiny_config, capsys):
    assert cli_main(["--config", tiny_config, "evaluate", "--unit", str(tmp_path / "nope.json"), "--no-store"]) == 1
    assert cli_main(["--config", str(tmp_path / "missing.json"), "simulate", "--p1", "idle"]) == 1
    assert "error:" in capsys.readouterr().err


def test_evaluate_twice_gives_identical_reports(tmp_path, tiny_config, revenger_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for out in (first, second):
        code = cli_main([
            "--config", tiny_config, "evaluate", "--unit", revenger_path, "--seed", "7",
            "--games-per-round", "2", "--skill", "weak", "--out", str(out), "--no-store",
        ])
        assert code == 0
    assert first.read_bytes() == second.read_bytes()
    doc = json.loads(first.read_text())
    assert doc["config"]["seedBase"] == 7
    assert doc["config"]["agent"]["maxIterations"] == 2
    assert get_default_store().list_records("reports") == []


def test_evaluate_records_report_in_store(tmp_path, tiny_config, revenger_path):
    out = tmp_path / "report.json"
    assert cli_main(["--config", tiny_config, "evaluate", "--unit", revenger_path,
                     "--games-per-round", "1", "--out", str(out)]) == 0
    [record] = get_default_store().list_records("reports")
    assert record["unit"]["name"] == "Revenger"
    assert record["total"] == json.loads(out.read_text())["total"]


def test_simulate_writes_event_log(tmp_path, capsys):
    out = tmp_path / "game.jsonl"
    assert cli_main(["simulate", "--p1", "idle", "--p2", "rush", "--seed", "1", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "player 2" in text and "elimination" in text
    lines = out.read_text().splitlines()
    assert json.loads(lines[-1])["kind"] == "terminal"


def test_simulate_with_generated_unit(tmp_path, tiny_config, revenger_path, capsys):
    assert cli_main(["--config", tiny_config, "simulate", "--unit", revenger_path, "--p1", "weak",
                     "--p2", "idle"]) == 0
    assert "Revenger: made" in capsys.readouterr().out


def test_matchup(tiny_config, revenger_path, capsys):
    assert cli_main(["--config", tiny_config, "matchup", "--unit", revenger_path, "--p1", "weak",
                     "--p2", "weak", "--games", "2", "--mode", "exclusive"]) == 0
    out = capsys.readouterr().out
    assert "weak-vs-weak (exclusive), Revenger: 2 games" in out
    assert "by P2 in 0" in out


def test_study_writes_reports(tmp_path, tiny_config):
    units_dir = tmp_path / "units"
    units_dir.mkdir()
    shutil.copy(FIXTURES_DIR / "revenger.json", units_dir)
    out_dir = tmp_path / "out"
    code = cli_main([
        "--config", tiny_config, "study", "--units-dir", str(units_dir), "--out-dir", str(out_dir),
        "--games", "1", "--skills", "weak", "--modes", "exclusive", "shared",
    ])
    assert code == 0
    with open(out_dir / "cells.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [(r["unit"], r["mode"]) for r in rows] == [("Revenger", "exclusive"), ("Revenger", "shared")]
    matrix = json.loads((out_dir / "matrix.json").read_text())
    assert matrix["skills"] == ["weak"]
    [study] = get_default_store().list_records("studies")
    assert study["units"] == ["Revenger"]


def test_study_event_logs_are_opt_in(tmp_path, tiny_config):
    units_dir = tmp_path / "units"
    units_dir.mkdir()
    shutil.copy(FIXTURES_DIR / "revenger.json", units_dir)
    base = ["--config", tiny_config, "study", "--units-dir", str(units_dir), "--games", "1",
            "--skills", "weak", "--modes", "shared", "--no-store"]
    assert cli_main(base + ["--out-dir", str(tmp_path / "quiet")]) == 0
    assert not (tmp_path / "quiet" / "events").exists()
    assert cli_main(base + ["--out-dir", str(tmp_path / "loud"), "--events"]) == 0
    logs = list((tmp_path / "loud" / "events").rglob("*.jsonl"))
    assert logs and all(p.name.startswith("Revenger-game000") for p in logs)


def test_study_after_evaluate_ignores_the_report(tmp_path, tiny_config):
    units_dir = tmp_path / "units"
    units_dir.mkdir()
    shutil.copy(FIXTURES_DIR / "phoenix.json", units_dir)
    assert cli_main(["--config", tiny_config, "evaluate", "--unit", str(units_dir / "phoenix.json"),
                     "--seed", "7", "--games-per-round", "1", "--no-store"]) == 0
    assert (units_dir / "phoenix.report.json").exists()
    code = cli_main(["--config", tiny_config, "study", "--units-dir", str(units_dir), "--out-dir",
                     str(tmp_path / "out"), "--games", "1", "--skills", "weak", "--modes", "exclusive",
                     "--no-store"])
    assert code == 0
    matrix = json.loads((tmp_path / "out" / "matrix.json").read_text())
    assert matrix["units"] == ["Phoenix"]


def test_study_needs_units(tmp_path, tiny_config):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli_main(["--config", tiny_config, "study", "--units-dir", str(empty), "--out-dir",
                     str(tmp_path / "out"), "--no-store"]) == 1


def test_generate_writes_unit_and_trace(tmp_path, tiny_config, capsys):
    out = tmp_path / "units" / "u.json"
    code = cli_main([
        "--config", tiny_config, "generate", "--seed", "3", "--games-per-round", "1",
        "--max-iterations", "1", "--out", str(out),
    ])
    assert code == 0
    assert out.exists()
    trace = json.loads(out.with_suffix(".trace.json").read_text())
    assert trace["seed"] == 3
    assert len(get_default_store().list_records("units")) == 1
    assert "Seed 3: fitness" in capsys.readouterr().out
