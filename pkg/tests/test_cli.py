import csv
import subprocess
import sys
from pathlib import Path

import pytest

from ranklab import checks, harness
from ranklab.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "consistent_small.toml"


def _summary(out):
    with open(out / "summary.csv", newline="") as fh:
        return list(csv.reader(fh))


def test_help_lists_every_check(capsys):
    assert main(["--help"]) == 0
    text = capsys.readouterr().out
    for name in list(checks.CHECKS) + list(harness.PRESETS):
        assert name in text


def test_no_subcommand_is_usage_error():
    assert main([]) == 2


def test_unknown_check_exits_2(tmp_path, capsys):
    assert main(["check", "--preset", "bogus", "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    assert main(["check", "--preset", "taildom", "--frobnicate"]) == 2


def test_check_writes_summary_and_detail(tmp_path):
    assert main(["check", "--preset", "pmbound43", "--out", str(tmp_path)]) == 0
    rows = _summary(tmp_path)
    assert rows[0] == ["name", "status", "metric", "value"]
    assert all(r[1] == "pass" for r in rows[1:])
    assert (tmp_path / "check_pmbound43.csv").exists()


def test_corrupted_footrule_fails_check(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(checks.CORRUPT_ENV, "1")
    monkeypatch.setattr(checks, "CHECKS", {**checks.CHECKS,
                                           "sandwich": lambda seed=0: checks.check_sandwich(seed, n=300)})
    assert main(["check", "--preset", "sandwich", "--out", str(tmp_path)]) == 1
    assert "sandwich" in capsys.readouterr().err
    assert _summary(tmp_path)[1][1] == "fail"


def test_simulate_config_and_seed_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("RANKLAB_SEED", "11")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate", "--config", str(CONFIG), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(CONFIG), "--out", str(b), "--seed", "11"]) == 0
    assert main(["simulate", "--config", str(CONFIG), "--out", str(c), "--seed", "12"]) == 0
    name = "sweep_consistent_small.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / name).read_bytes() != (c / name).read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_simulate_missing_key_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("\n".join(l for l in CONFIG.read_text().splitlines() if not l.startswith("replicates")))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "replicates" in capsys.readouterr().err


def test_simulate_unreadable_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.toml")]) == 2


def test_preset_smoke(tmp_path):
    assert main(["preset", "--preset", "consistent", "--out", str(tmp_path), "--seed", "7"]) == 0
    assert (tmp_path / "summary.csv").exists()
    lines = (tmp_path / "sweep_consistent.csv").read_text().splitlines()
    assert len(lines) == 1 + 5 * 3 * 3


def test_oracle_compare(tmp_path):
    assert main(["oracle-compare", "--p", "5", "--instances", "100", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    rows = {r[2]: r for r in _summary(tmp_path)[1:]}
    assert float(rows["agreement_rate"][3]) >= 0.99
    assert main(["oracle-compare", "--p", "9", "--out", str(tmp_path)]) == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ranklab.cli", "check", "--preset", "taildom",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
