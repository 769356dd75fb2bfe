import csv
import json

import pytest

from sliceforge.baselines import equal_allocation
from sliceforge.cli import main
from sliceforge.domain import load_scenario


def run(*argv):
    return main([str(a) for a in argv])


def test_config_default(tmp_path):
    assert run("config", "default", "--out", tmp_path / "s.json") == 0
    assert len(load_scenario(tmp_path / "s.json").ues) == 12


def test_unknown_flag_is_validation_error():
    with pytest.raises(SystemExit) as exc:
        run("run", "--policy", "equal", "--out", "x", "--bogus")
    assert exc.value.code == 1


def test_invalid_scenario(tmp_path):
    run("config", "default", "--out", tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    doc["epoch"] = 1700
    (tmp_path / "s.json").write_text(json.dumps(doc))
    assert run("run", "--policy", "equal", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o") == 1


def test_run_equal_delegates(tmp_path):
    assert run("run", "--policy", "equal", "--seed", 3, "--epochs", 8, "--out", tmp_path) == 0
    lines = (tmp_path / "kpi_log.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["policy"] == "equal"
    for line in lines[1:]:
        doc = json.loads(line)
        want = equal_allocation(doc["active_ues"], 52)
        assert {int(k): v for k, v in doc["alloc"]["per_ue"].items()} == want
    cfg = json.loads((tmp_path / "config.json").read_text())
    assert cfg["seed"] == 3 and cfg["scenario"]["seed"] == 3


def test_missing_checkpoint_and_unknown_policy(tmp_path):
    assert run("run", "--policy", f"ppo:{tmp_path / 'nope.json'}", "--out", tmp_path / "o") == 2
    assert run("run", "--policy", "ppo", "--out", tmp_path / "o") == 1
    assert run("run", "--policy", "random", "--out", tmp_path / "o") == 1


def test_train_then_run_checkpoint(tmp_path):
    out = tmp_path / "t"
    assert run("train", "--agent", "ppo", "--seed", 1, "--pretrain-steps", 256, "--epochs", 10, "--out", out) == 0
    for name in ("checkpoint.json", "kpi_log.jsonl", "curve.csv", "config.json"):
        assert (out / name).is_file()
    rows = list(csv.DictReader((out / "curve.csv").open()))
    assert rows[0]["phase"] == "pretrain"
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("run", "--policy", f"ppo:{out / 'checkpoint.json'}", "--seed", 1, "--epochs", 5, "--out", a) == 0
    assert run("run", "--policy", f"ppo:{out / 'checkpoint.json'}", "--seed", 1, "--epochs", 5, "--out", b) == 0
    assert (a / "kpi_log.jsonl").read_bytes() == (b / "kpi_log.jsonl").read_bytes()
    # wrong agent kind for the checkpoint
    assert run("run", "--policy", f"dqn:{out / 'checkpoint.json'}", "--out", tmp_path / "c") == 2


def test_online_only_training(tmp_path):
    assert run("train", "--pretrain-steps", 0, "--epochs", 300, "--out", tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "curve.csv").open()))
    assert rows and all(r["phase"] == "online" for r in rows)


def test_dqn_curve_has_replay_and_epsilon(tmp_path):
    assert run("train", "--agent", "dqn", "--pretrain-steps", 300, "--epochs", 10, "--out", tmp_path) == 0
    row = next(csv.DictReader((tmp_path / "curve.csv").open()))
    assert float(row["epsilon"]) < 1.0 and int(row["replay_size"]) == 256


def test_report_six_policies(tmp_path):
    ck = tmp_path / "ppo"
    run("train", "--agent", "ppo", "--pretrain-steps", 0, "--epochs", 4, "--out", ck)
    dq = tmp_path / "dqn"
    run("train", "--agent", "dqn", "--pretrain-steps", 0, "--epochs", 4, "--out", dq)
    logs = []
    for pol in ("equal", "prop", "prealloc", "pf", f"ppo:{ck / 'checkpoint.json'}", f"dqn:{dq / 'checkpoint.json'}"):
        d = tmp_path / pol.split(":")[0] / "run"
        assert run("run", "--policy", pol, "--epochs", 6, "--out", d) == 0
        logs.append(d / "kpi_log.jsonl")
    assert run("report", "--inputs", *logs, "--out", tmp_path / "rep") == 0
    pols = {r["policy"] for r in csv.DictReader((tmp_path / "rep" / "summary.csv").open())}
    assert pols == {"equal", "prop", "prealloc", "pf", "ppo", "dqn"}
    assert run("report", "--inputs", logs[0], "--out", tmp_path / "one") == 0


def test_report_malformed_log_exit_code(tmp_path):
    run("run", "--policy", "equal", "--epochs", 3, "--out", tmp_path)
    log = tmp_path / "kpi_log.jsonl"
    log.write_text(log.read_text() + "garbage\n")
    assert run("report", "--inputs", log, "--out", tmp_path / "rep") == 1
    assert run("report", "--inputs", tmp_path / "missing.jsonl", "--out", tmp_path / "rep") == 1


def test_log_level_env(monkeypatch, tmp_path, caplog):
    monkeypatch.setenv("SLICEFORGE_LOG_LEVEL", "debug")
    assert run("run", "--policy", "equal", "--epochs", 1, "--out", tmp_path) == 0
    monkeypatch.setenv("SLICEFORGE_LOG_LEVEL", "loud")
    assert run("run", "--policy", "equal", "--epochs", 1, "--out", tmp_path) == 0
    assert "ignoring SLICEFORGE_LOG_LEVEL" in caplog.text
