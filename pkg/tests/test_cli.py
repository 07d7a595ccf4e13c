import csv
import json
import shutil
import subprocess

import pytest

from blumecapel.cli import run


def records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_exact_verify_jsonl(tmp_path):
    out = tmp_path / "es.jsonl"
    assert run(["exact-verify", "--suite", "es-coupling", "--beta", "0.5", "--delta", "0.0",
                "--max-vertices", "2", "--out", str(out)]) == 0
    rows = records(out)
    assert rows and all(r["violations"] == 0 and r["seed"] == 0 for r in rows)
    assert {"check", "instance", "convention", "max_abs_err", "violations"} <= set(rows[0])
    man = json.loads((tmp_path / "es.jsonl.manifest.json").read_text())
    assert man["command"] == "exact-verify" and man["convention"] == rows[0]["convention"]
    assert {"params", "seed", "version", "wall_time", "threads"} <= set(man)


def test_leeyang_example(tmp_path):
    out = tmp_path / "ly.jsonl"
    assert run(["leeyang", "--graph", "path5", "--delta", "-1.386", "--scan-cone", "2.0",
                "--grid", "101", "--out", str(out)]) == 0
    row = records(out)[0]
    assert row["min_normalised"] > 1e-9 and row["passed"]


def test_csv_output(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["sample", "--instance", "box:2:2", "--beta", "0.4", "--delta", "0", "--samples", "400",
                "--burn-in", "50", "--seed", "11", "--out", str(out)]) == 0
    raw = out.read_bytes()
    assert raw.count(b"\r\n") == 4 and raw.endswith(b"\r\n")
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["observable"] for r in rows] == ["mag", "sigma0", "sigma0sq"]
    assert all(r["seed"] == "11" for r in rows)
    # 17 significant digits survive a round trip
    for r in rows:
        assert float(r["mean"]) == float(format(float(r["mean"]), ".17g"))


def test_check_failures_exit_one(tmp_path):
    out = tmp_path / "wm.jsonl"
    code = run(["osss-verify", "--checks", "weak-monotonicity", "--instance", "1x2", "--r", "0.05",
                "--out", str(out)])
    row = records(out)[0]
    assert code == (1 if row["violations"] else 0)
    assert run(["osss-verify", "--checks", "weak-monotonicity,osss", "--out", str(tmp_path / "ok.jsonl")]) == 0


@pytest.mark.parametrize("argv", [
    ["exact-verify", "--suite", "es-coupling", "--bogus", "1", "--out", "x.jsonl"],
    ["frobnicate", "--out", "x.jsonl"],
    [],
    ["sample", "--beta", "0.4", "--out", "x.jsonl"],
    ["leeyang", "--out", "x.jsonl"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sampling run\nbeta = 0.4\ndelta=0\ninstance=box:2:2\nsamples=300\nburn-in=20\nseed=3\n")
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(["sample", "--config", str(cfg), "--out", str(a)]) == 0
    assert run(["sample", "--beta", "0.4", "--delta", "0", "--instance", "box:2:2", "--samples", "300",
                "--burn-in", "20", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.jsonl"
    assert run(["sample", "--config", str(cfg), "--seed", "4", "--out", str(c)]) == 0
    assert records(c)[0]["seed"] == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert run(["sample", "--config", str(bad), "--out", str(c)]) == 2


def test_replay_is_bit_identical_across_threads(tmp_path):
    out = tmp_path / "cr.csv"
    assert run(["crossing", "--p", "0.6", "--a", "1.0", "--scale", "4", "--samples", "300",
                "--chains", "3", "--seed", "5", "--out", str(out)]) == 0
    for threads in ("1", "8"):
        again = tmp_path / f"again{threads}.csv"
        assert run(["replay", str(out) + ".manifest.json", "--out", str(again), "--threads", threads]) == 0
        assert again.read_bytes() == out.read_bytes()


@pytest.mark.skipif(shutil.which("blumecapel") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["blumecapel", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "blumecapel" in res.stdout
    res = subprocess.run(["blumecapel", "sample", "--nope"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr.lower()
