import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ggmdl import __version__
from ggmdl import cli


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def ar1(tmp_path):
    assert run("gen", "--structure", "ar1", "--p", 8, "--n", 120, "--seed", 7, "--out-dir", tmp_path) == 0
    return tmp_path


def test_gen_shape_and_metadata(ar1):
    x = np.loadtxt(ar1 / "data.csv", delimiter=",")
    assert x.shape == (120, 8)
    truth = json.loads((ar1 / "truth.json").read_text())
    assert truth["seed"] == 7 and truth["version"] == __version__
    assert truth["config"]["structure"] == "ar1"
    assert truth["edges"] == [[i, i + 1] for i in range(7)]


def test_gen_is_byte_identical(tmp_path):
    outs = []
    for _ in range(2):
        assert run("gen", "--structure", "hub", "--p", 10, "--n", 30, "--seed", 3, "--out-dir", tmp_path) == 0
        outs.append(((tmp_path / "data.csv").read_bytes(), (tmp_path / "truth.json").read_bytes()))
    assert outs[0] == outs[1]


def test_gen_cycle_needs_three(tmp_path, capsys):
    assert run("gen", "--structure", "cycle", "--p", 2, "--n", 5, "--out-dir", tmp_path) == 2
    assert "p >= 3" in capsys.readouterr().err


def test_unknown_structure_is_usage_error():
    assert run("gen", "--structure", "grid", "--p", 5, "--n", 5) == 2


def test_csv_round_trip_is_byte_identical(ar1):
    text = (ar1 / "data.csv").read_text()
    assert cli.format_matrix_csv(cli.read_matrix_csv(ar1 / "data.csv")) == text


def test_select_with_truth(ar1, capsys):
    out = ar1 / "sel.json"
    assert run("select", ar1 / "data.csv", "--truth", ar1 / "truth.json", "--grid", 10, "--out", out) == 0
    printed = capsys.readouterr().out
    assert "best_lambda=" in printed and "f1=" in printed
    doc = json.loads(out.read_text())
    assert doc["seed"] == 0 and doc["version"] == __version__ and doc["config"]["grid"] == 10
    assert len(doc["selection"]["records"]) == 10
    assert 0.0 <= doc["selection"]["f1"]["f1"] <= 1.0


def test_select_single_lambda(ar1):
    out = ar1 / "one.json"
    assert run("select", ar1 / "data.csv", "--grid", 1, "--lambda", 0.2, "--out", out) == 0
    sel = json.loads(out.read_text())["selection"]
    assert [r["lambda"] for r in sel["records"]] == [0.2]


def test_select_grid_one_needs_lambda(ar1):
    assert run("select", ar1 / "data.csv", "--grid", 1) == 2


def test_select_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert run("select", missing) == 1
    assert str(missing) in capsys.readouterr().err


def test_select_ragged_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    assert run("select", bad) == 1


def test_select_center_flag(tmp_path):
    x = np.random.default_rng(0).standard_normal((40, 4)) + 5.0
    path = tmp_path / "shifted.csv"
    path.write_text(cli.format_matrix_csv(x))
    assert run("select", path, "--center", "--grid", 5, "--out", tmp_path / "c.json") == 0
    assert json.loads((tmp_path / "c.json").read_text())["config"]["center"] is True


def _score_lines(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_detect_train_and_score(tmp_path):
    assert run("gen", "--structure", "ar1", "--p", 8, "--n", 400, "--seed", 1, "--out-dir", tmp_path / "t") == 0
    assert run("gen", "--structure", "ar2", "--p", 8, "--n", 200, "--seed", 2, "--out-dir", tmp_path / "a") == 0
    model = tmp_path / "model.json"
    assert run("detect", "--train", tmp_path / "t" / "data.csv", "--model", model, "--grid", 15) == 0
    doc = json.loads(model.read_text())
    assert {"seed", "version", "config", "model"} <= set(doc)

    out0, out5 = tmp_path / "s0.jsonl", tmp_path / "s5.jsonl"
    common = ["detect", "--score", tmp_path / "a" / "data.csv", "--model", model,
              "--batch-size", 100, "--grid", 15]
    assert run(*common, "--out", out0) == 0
    assert run(*common, "--threshold", 5, "--out", out5) == 0
    a, b = _score_lines(out0), _score_lines(out5)
    assert len(a) == 2
    assert {"batch_id", "typical_bits", "atypical_bits", "score", "anomalous"} <= set(a[0])
    for x, y in zip(a, b):
        assert x["score"] == y["score"]
        assert x["anomalous"] == (x["score"] < 0) and y["anomalous"] == (y["score"] < 5)


def test_detect_dimension_mismatch(tmp_path):
    assert run("gen", "--structure", "ar1", "--p", 6, "--n", 100, "--out-dir", tmp_path / "t") == 0
    assert run("gen", "--structure", "ar1", "--p", 5, "--n", 100, "--out-dir", tmp_path / "u") == 0
    model = tmp_path / "m.json"
    assert run("detect", "--train", tmp_path / "t" / "data.csv", "--model", model, "--grid", 5) == 0
    assert run("detect", "--score", tmp_path / "u" / "data.csv", "--model", model) == 1


def test_bench_layout_and_determinism(tmp_path):
    args = ["bench", "--kinds", "cycle,ar1", "--sizes", "8x30", "--trials", 1, "--seed", 9, "--grid", 6]
    assert run(*args, "--out", tmp_path / "a.csv") == 0
    assert run(*args, "--out", tmp_path / "b.csv", "--jobs", 2) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    lines = a.splitlines()
    assert lines[0] == "Type,p,N,CV,BIC,EBIC,Degree,IID,Triangle"
    assert [ln.split(",")[:3] for ln in lines[1:]] == [["Cycle", "8", "30"], ["AR(1)", "8", "30"]]
    assert all(len(ln.split(",")) == 9 for ln in lines)
    detail = json.loads((tmp_path / "a.json").read_text())
    assert detail["seed"] == 9 and len(detail["trials"]) == 2


def test_bench_presets_resolve():
    ns = cli.build_parser().parse_args(["bench", "--preset", "table2-desk"])
    kinds, sizes, methods, jobs = cli._resolve_bench(ns)
    assert sizes == [(40, 20)] and len(kinds) == 5 and len(methods) == 6


@pytest.mark.parametrize("extra", [
    ["--kinds", "cycle"],
    ["--kinds", "bogus", "--sizes", "8x30"],
    ["--kinds", "cycle", "--sizes", "8by30"],
    ["--kinds", "cycle", "--sizes", "8x30", "--trials", "0"],
    ["--kinds", "cycle", "--sizes", "8x30", "--methods", "aic"],
])
def test_bench_usage_errors(extra, tmp_path):
    assert run("bench", *extra, "--out", tmp_path / "x.csv") == 2
    assert not (tmp_path / "x.csv").exists()


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv("GGM_JOBS", "3")
    assert cli._default_jobs() == 3
    monkeypatch.setenv("GGM_JOBS", "many")
    with pytest.raises(cli.UsageError):
        cli._default_jobs()


def test_interrupted_write_leaves_nothing(tmp_path, monkeypatch):
    target = tmp_path / "out.csv"

    def boom(*_):
        raise KeyboardInterrupt

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(KeyboardInterrupt):
        cli.atomic_write(target, "data\n")
    assert list(tmp_path.iterdir()) == []


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ggmdl.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "ggmdl.cli", "select"], capture_output=True, text=True)
    assert proc.returncode == 2
