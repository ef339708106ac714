import io
import json

import pytest

from capacitary import __version__
from capacitary.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    text = out.getvalue()
    return code, (json.loads(text) if text.startswith("{") else text)


def test_verify_fubini_passes():
    code, rep = run("verify", "fubini", "--w", "power:0", "--p", "2", "--delta", "0.5")
    assert code == 0 and rep["passed"] is True
    assert rep["version"] == __version__ and rep["config"]["w"] == "power:0" and "seed" in rep


def test_counterexample_one():
    code, rep = run("counterexample", "1", "--m", "8", "--n", "2", "--delta", "1")
    assert code == 0
    assert rep["result"]["measured"]["iterated_integral"] >= 1.0


@pytest.mark.parametrize("argv", [["content", "--bogus"], ["nosuch"], ["verify", "nosuch"]])
def test_usage_errors(argv, capsys):
    code, _ = run(*argv)
    assert code == 2


def test_validation_error_exit_two():
    code, _ = run("content", "--set", "full", "--n", "1", "--delta", "1.5")
    assert code == 2


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("generate", "random:7", "--output", str(a))[0] == 0
    assert run("generate", "random:7", "--output", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_generate_power_zero_is_one(tmp_path):
    p = tmp_path / "w.json"
    run("generate", "power:0", "--output", str(p))
    assert set(json.loads(p.read_text())["values"]) == {1.0}


def test_generate_counterexample(tmp_path):
    f, w = tmp_path / "f.json", tmp_path / "w.json"
    run("generate", "ce1:2", "--n", "1", "-L", "1", "--role", "f", "--output", str(f))
    run("generate", "ce1:2", "--n", "1", "-L", "1", "--role", "w", "--output", str(w))
    assert json.loads(f.read_text())["values"] == [1.0, 2.0]
    assert json.loads(w.read_text())["values"] == [1.0, 0.5]


def test_file_inputs(tmp_path):
    w = tmp_path / "w.json"
    run("generate", "random:3", "-L", "4", "--output", str(w))
    code, rep = run("apconst", "--w", str(w), "-L", "4")
    assert code == 0 and rep["result"]["value"] >= 1


def test_content_and_sparse_cover():
    code, rep = run("content", "--set", "cells:0,3", "-L", "2", "--trace")
    assert rep["result"]["content"] == pytest.approx(1.0)
    assert len(rep["result"]["cover"]) == 2
    code, rep = run("sparsecover", "--set", "random:1", "--n", "2", "-L", "3")
    assert code == 0 and rep["result"]["violations"] == []


def test_apconst_sweep_matches_oracle():
    code, rep = run("apconst", "--w", "power:-0.5", "--depths", "4,6,8")
    assert rep["result"]["trend"]["verdict"] == "divergent"
    assert rep["result"]["oracle_agrees"] is True


def test_jones_and_czdecomp():
    code, rep = run("jones", "factorize", "--w", "power:0.25", "--g", "balanced")
    assert code == 0 and rep["result"]["reconstruction_error"] < 1e-10
    code, rep = run("czdecomp", "--w", "power:0.25", "--lam", "2")
    assert code == 0 and rep["passed"] is True


def test_csv_and_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CAPACITARY_OUTPUT_DIR", str(tmp_path))
    code, text = run("integrate", "--f", "const:2", "--csv")
    assert code == 0 and text.startswith("key,value")
    assert json.loads((tmp_path / "integrate.json").read_text())["result"]["content_integral"] == 2.0


@pytest.mark.parametrize("argv", [
    ["maximal", "--f", "ce1:4"],
    ["rhi", "--w", "power:0.25"],
    ["selfimprove", "--w", "power:0.25", "--depths", "4,6,8"],
    ["embed", "--w", "power:0.25", "--beta", "1", "--f", "random:1"],
    ["verify", "pointwise-fubini", "--w", "ce1:8"],
    ["verify", "strong", "--w", "power:0.2", "--depths", "4,5,6"],
    ["counterexample", "2", "--m", "8"],
    ["counterexample", "3", "--n", "2", "--levels", "3", "-L", "4", "--delta", "1"],
    ["jones", "synthesize", "--w0", "power:-0.2", "--w1", "const:1"],
])
def test_commands_run(argv):
    code, rep = run(*argv)
    assert code == 0 and rep["command"] == argv[0]
