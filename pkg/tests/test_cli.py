import csv
import json
import os

import pytest

from robsplit.cli import main
from robsplit.fixtures import deterministic_toy, interval_toy
from robsplit.model import save_problem


def _trace(path):
    with open(os.path.join(path, "trace.jsonl")) as fh:
        return [json.loads(line) for line in fh]


def test_solve_deterministic_file(tmp_path, capsys):
    src = tmp_path / "det.json"
    save_problem(deterministic_toy(), src)
    assert main(["solve", "--input", str(src), "--out", str(tmp_path)]) == 0
    trace = _trace(tmp_path)
    assert len(trace) == 1 and trace[0]["t_bar"] == pytest.approx(3.0)
    assert "t_bar: 3" in capsys.readouterr().out


def test_solve_interval_toy(tmp_path, capsys):
    src = tmp_path / "toy.json"
    save_problem(interval_toy(), src)
    assert main(["solve", "--input", str(src), "--out", str(tmp_path)]) == 0
    assert _trace(tmp_path)[0]["t_bar"] == pytest.approx(1.0)


def test_solve_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"L": 1, "d2": 1}')
    assert main(["solve", "--input", str(bad), "--out", str(tmp_path)]) != 0
    assert "malformed" in capsys.readouterr().err


def test_solve_reports_violated_assumption(tmp_path, capsys):
    doc = {"L": 1, "d2": 1, "cost_y": {"nominal": [1.0]},
           "base_set": {"P": [[-1.0]], "p": [0.0]}}
    src = tmp_path / "unbounded.json"
    src.write_text(json.dumps(doc))
    assert main(["solve", "--input", str(src), "--out", str(tmp_path)]) != 0
    assert "nonempty-bounded-set" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fixture": "tied-routes", "max_cells": 1}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert len(_trace(tmp_path)) == 1
    assert main(["solve", "--config", str(cfg), "--max-cells", "4", "--out", str(tmp_path)]) == 0
    assert _trace(tmp_path)[-1]["cells"] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fixture": "tied-routes", "colour": 1}))
    assert main(["solve", "--config", str(cfg)]) == 2


def _experiment(out):
    return main(["rpp-experiment", "--n", "10", "--b", "3", "--instances", "3", "--targets", "2",
                 "--out", str(out)])


@pytest.fixture(scope="module")
def experiment_dirs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    assert _experiment(a) == 0 and _experiment(b) == 0
    return a, b


def test_experiment_row_count(experiment_dirs):
    a, _ = experiment_dirs
    with open(a / "instances.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * (1 + 3)
    assert {r["method"] for r in rows} == {"bnb", "heuristic"}


def test_experiment_outputs_byte_identical(experiment_dirs):
    a, b = experiment_dirs
    for name in ("instances.csv", "aggregate.csv", "plot.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "LP cutset: 1 scenario; full cutset: 2 scenarios" in out
    assert "FAIL" not in out


@pytest.mark.parametrize("fault,check", [("dual", "duality-audit"), ("scenario", "scenario-detection")])
def test_verify_detects_injected_fault(fault, check, capsys):
    assert main(["verify", "--inject", fault]) == 1
    out = capsys.readouterr().out
    assert f"FAIL  {check}" in out
    assert f"violated: {check}" in out
