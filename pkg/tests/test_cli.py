import json
import os
import socket
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pcrlab.cli import main

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("UPDATE_GOLDEN") == "1"

SMALL_SIM = ["simulate", "--scenario", "2", "--m", "400", "--d", "50", "--iterations", "5",
             "--seeds", "0,1"]


def check_golden(name, text):
    path = GOLDEN / name
    if UPDATE:
        path.parent.mkdir(exist_ok=True)
        path.write_text(text)
    assert text == path.read_text(), f"{name} drifted from its golden copy"


def test_threshold_pcr(capsys, tmp_path):
    out = tmp_path / "t.json"
    assert main(["threshold", "--scheme", "pcr", "--n", "6", "--r", "3", "--json", str(out)]) == 0
    assert "measured K=3" in capsys.readouterr().out
    report = json.loads(out.read_text())
    for key in ("max_decode_error", "worst_condition_number"):
        assert report.pop(key) < 1e3
    check_golden("threshold_pcr_6_3.json", json.dumps(report, indent=2, sort_keys=True) + "\n")


def test_threshold_gc(capsys):
    assert main(["threshold", "--scheme", "gc", "--n", "6", "--r", "3"]) == 0
    assert "measured K=4" in capsys.readouterr().out


def test_threshold_bcc(capsys):
    assert main(["threshold", "--scheme", "bcc", "--n", "6", "--r", "3"]) == 2
    assert "no fixed threshold" in capsys.readouterr().err


def test_threshold_sampled(capsys):
    assert main(["threshold", "--scheme", "pcr", "--n", "20", "--r", "5", "--samples", "30"]) == 0


@pytest.mark.parametrize("args", [["--scheme", "pcr", "--n", "6", "--r", "2"],
                                  ["--scheme", "uncoded", "--n", "4"],
                                  ["--scheme", "pcr", "--n", "4", "--r", "4"]])
def test_bound(args, capsys):
    assert main(["bound", *args]) == 0
    assert "counterexamples 0" in capsys.readouterr().out


def test_simulate_outputs_and_golden(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*SMALL_SIM, "--out", str(a)]) == 0
    table = capsys.readouterr().out
    assert "pcr" in table and "gc" in table
    assert main([*SMALL_SIM, "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["cdf_bcc.csv", "cdf_gc.csv", "cdf_pcr.csv", "cdf_uncoded.csv",
                     "summary.csv", "traces.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    check_golden("summary.csv", (a / "summary.csv").read_text())
    check_golden("traces.csv", (a / "traces.csv").read_text())
    rows = (a / "summary.csv").read_text().splitlines()
    assert [r.split(",")[2] for r in rows[1:4]] == ["40", "31", "7"]
    assert rows[4].startswith("bcc,10,avg ")


@pytest.mark.parametrize("scenario,expected", [("2", ["40", "31", "7"]), ("4", ["30", "21", "5"])])
def test_simulate_thresholds(scenario, expected, tmp_path):
    assert main(["simulate", "--scenario", scenario, "--d", "50", "--m", "600" if scenario == "4" else "800",
                 "--iterations", "2", "--out", str(tmp_path)]) == 0
    rows = [r.split(",") for r in (tmp_path / "summary.csv").read_text().splitlines()[1:]]
    assert [r[2] for r in rows[:3]] == expected


def test_simulate_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": 1, "d": 40, "iterations": 3, "schemes": ["pcr"],
                               "cost": {"message_jitter_s": 0.0}}))
    assert main(["simulate", "--config", str(cfg), "--iterations", "2", "--out", str(tmp_path / "o")]) == 0
    traces = (tmp_path / "o" / "traces.csv").read_text().splitlines()
    assert len(traces) == 1 + 2


def test_simulate_usage_errors(tmp_path, capsys):
    assert main(["simulate", "--schemes", ""]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": 1, "surprise": True}))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "surprise" in capsys.readouterr().err
    assert main(["simulate", "--schemes", "pcr", "--n", "4", "--r", "10"]) == 2
    assert main(["nonsense"]) == 2


def test_gd_vs_centralized(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert main(["gd", "--scheme", "pcr", "--out", str(out)]) == 0
    line = capsys.readouterr().out
    dev = float(line.rsplit("max_deviation=", 1)[1])
    assert dev <= 1e-6
    assert main(["gd", "--centralized", "--out", str(tmp_path / "c.csv")]) == 0
    first = out.read_text().splitlines()
    assert first[0] == "iteration,loss,deviation,time_s" and len(first) == 102


def test_encode(tmp_path):
    assert main(["encode", "--scheme", "pcr", "--n", "6", "--r", "3", "--nodes", "integers",
                 "--m", "12", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "shards.json").read_text())
    assert meta["workers"][2]["coeffs"][0] == [3.0, 0, 0, -2.0, 0, 0]
    z = np.load(tmp_path / "worker_2.npz")
    assert z["shards"].shape == (3, 2, 2)


def test_serve_port_in_use(capsys):
    with socket.create_server(("127.0.0.1", 0)) as busy:
        port = busy.getsockname()[1]
        assert main(["serve", "--port", str(port), "--n", "4", "--r", "2", "--m", "40", "--d", "3"]) == 3


def test_kill_at_needs_spawn():
    assert main(["serve", "--kill-at", "1:0", "--n", "4", "--r", "2", "--m", "40"]) == 2


def run_cli(*args, timeout=60):
    return subprocess.run([sys.executable, "-m", "pcrlab", *args], capture_output=True, text=True,
                          timeout=timeout)


@pytest.mark.slow
def test_serve_kill_one_completes():
    res = run_cli("serve", "--scheme", "pcr", "--n", "4", "--r", "2", "--m", "40", "--d", "5",
                  "--iterations", "15", "--spawn", "--kill-at", "4:1", "--timeout", "5")
    assert res.returncode == 0, res.stderr
    assert "max_deviation" in res.stdout


@pytest.mark.slow
def test_serve_kill_two_times_out():
    res = run_cli("serve", "--scheme", "pcr", "--n", "4", "--r", "2", "--m", "40", "--d", "5",
                  "--iterations", "15", "--spawn", "--kill-at", "2:1", "--kill-at", "2:2", "--timeout", "0.5")
    assert res.returncode == 4
    assert "timed out" in res.stderr


def test_work_without_master():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    res = run_cli("work", "--port", str(port), "--worker-id", "0", "--connect-timeout", "0.3")
    assert res.returncode == 3
    assert "cannot reach master" in res.stderr
