import json
import math
import os
import subprocess
import sys

import pytest

from geodist.cli import main
from geodist.matrix_io import write_matrix
from geodist.optim import parse_trace_csv

SMALL_CONFIG = """\
d_t: 24
d_s: 12
epsilon: 0.4
n_override: 120
losses: [fg, procrustes]
seeds: [0, 1]
optimizer:
  batch_size: 32
  epochs: 2
  luby_trials: 2
"""


@pytest.fixture
def matrices(tmp_path):
    t, s = tmp_path / "t.txt", tmp_path / "s.txt"
    write_matrix(t, [[1.0, 0.0], [-1.0, 0.0]])
    write_matrix(s, [[1.0, 0.0], [1.0, 0.0]])
    return str(t), str(s)


@pytest.mark.parametrize("metric, expected", [
    ("fg", math.sqrt(8)), ("cka", 0.0), ("cka-dist", 1.0), ("procrustes", 2.0),
    ("procrustes-direct", 2.0), ("linproj", math.sqrt(2)),
])
def test_metric_values(matrices, capsys, metric, expected):
    assert main(["metric", *matrices, "--metric", metric]) == 0
    name, value = capsys.readouterr().out.split()
    assert name == metric and float(value) == pytest.approx(expected, abs=1e-12)


def test_metric_normalize(tmp_path, capsys):
    t, s = tmp_path / "t.txt", tmp_path / "s.txt"
    write_matrix(t, [[3.0, 4.0], [0.0, 2.0]])
    write_matrix(s, [[0.6, 0.8], [0.0, 1.0]])
    assert main(["metric", str(t), str(s), "--metric", "fg", "--normalize"]) == 0
    assert float(capsys.readouterr().out.split()[1]) == pytest.approx(0.0, abs=1e-12)


def test_metric_shape_error(tmp_path, matrices, capsys):
    other = tmp_path / "o.txt"
    write_matrix(other, [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert main(["metric", matrices[0], str(other), "--metric", "fg"]) == 3
    assert "error" in capsys.readouterr().err


def test_metric_bad_input(tmp_path, matrices, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 2\n1 2\n")
    assert main(["metric", matrices[0], str(bad)]) == 2
    assert main(["metric", matrices[0], str(tmp_path / "missing.txt")]) == 2
    zero = tmp_path / "zero.txt"
    write_matrix(zero, [[0.0, 0.0], [1.0, 0.0]])
    assert main(["metric", matrices[0], str(zero), "--normalize"]) == 2


def test_synth_writes_artifacts(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL_CONFIG)
    out = tmp_path / "out"
    assert main(["synth", str(cfg), "--out", str(out), "--jobs", "1"]) == 0
    files = sorted(os.listdir(out))
    assert files == ["config.json", "fg_0.csv", "fg_1.csv", "manifest.txt",
                     "procrustes_0.csv", "procrustes_1.csv", "summary.csv"]
    trace = parse_trace_csv((out / "fg_0.csv").read_text())
    assert trace[-1].orth_count is not None
    resolved = json.loads((out / "config.json").read_text())
    assert resolved["n"] == 120 and resolved["optimizer"]["renormalize_rows"] is True
    manifest = (out / "manifest.txt").read_text()
    assert "timestamp: 1970-01-01T00:00:00+00:00" in manifest and "seeds: 0 1" in manifest
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("loss,runs,mean_count") and len(summary) == 3
    assert capsys.readouterr().out.splitlines() == summary


def test_synth_is_reproducible(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL_CONFIG)
    main(["synth", str(cfg), "--out", str(tmp_path / "a"), "--jobs", "1"])
    main(["synth", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"])
    for name in ("fg_0.csv", "procrustes_1.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_synth_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("GEODIST_SEED", "5")
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL_CONFIG)
    main(["synth", str(cfg), "--out", str(tmp_path / "o"), "--jobs", "1"])
    assert (tmp_path / "o" / "fg_5.csv").exists() and not (tmp_path / "o" / "fg_0.csv").exists()


@pytest.mark.parametrize("edit, key", [
    (("losses: [fg, procrustes]", "losses: []"), "losses"),
    (("losses: [fg, procrustes]", "losses: [mse]"), "losses"),
    (("epsilon: 0.4", "epsilon: 1.4"), "epsilon"),
    (("d_s: 12", "d_s: 12\nwidth: 3"), "width"),
    (("  epochs: 2", "  epochs: 2\n  momentum: 0.5"), "optimizer.momentum"),
    (("seeds: [0, 1]", "seeds: [-1]"), "seeds"),
])
def test_synth_config_errors(tmp_path, capsys, edit, key):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL_CONFIG.replace(*edit))
    assert main(["synth", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert f"'{key}'" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_synth_json_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"d_t": 16, "d_s": 8, "epsilon": 0.5, "n_override": 40,
                               "losses": ["cka"], "seeds": [0],
                               "optimizer": {"batch_size": 16, "epochs": 1}}))
    assert main(["synth", str(cfg), "--out", str(tmp_path / "o"), "--jobs", "1"]) == 0


def test_verify_theorems_passing_subsets(capsys):
    for which in ("2", "3", "lemmas"):
        assert main(["verify-theorems", "--which", which, "--seeds", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS ") for line in lines)


def test_verify_theorems_blend_reports_failures(capsys):
    code = main(["verify-theorems", "--which", "1", "--seeds", "2", "--eps", "0.5"])
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and all("fg_exact_ok=true" in line for line in lines)
    assert code == (0 if all(line.startswith("PASS") for line in lines) else 1)


def test_verify_theorems_corrupt_hook(capsys):
    assert main(["verify-theorems", "--which", "3", "--seeds", "2", "--corrupt"]) == 1
    assert capsys.readouterr().out.splitlines()[0].startswith("FAIL theorem3")


def test_grad_check(capsys):
    assert main(["grad-check", "--seeds", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 8 and all(line.startswith("PASS grad loss=") for line in lines)


def test_grad_check_degenerate(capsys):
    assert main(["grad-check", "--loss", "procrustes", "--seeds", "1", "--degenerate"]) == 1
    assert "NearSingular" in capsys.readouterr().out


def test_grad_check_bad_size(capsys):
    assert main(["grad-check", "--n", "1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "geodist", "grad-check", "--loss", "fg", "--seeds", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("PASS")
