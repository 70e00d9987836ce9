import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from intervalest.cli import main
from intervalest.harness.io import read_run_csv

ROOT = Path(__file__).resolve().parent.parent
SCEN = ROOT / "scenarios"

SMALL = {
    "version": 1,
    "name": "small",
    "horizon": 8,
    "seed": 1,
    "num_trajectories": 5,
    "system": {"type": "lti", "A": [[0.5, -0.3], [0.2, 0.4]], "B": [[1.0], [0.5]], "C": [[1.0, 0.0]]},
    "x0": {"center": [0.0, 1.0], "radius": [0.5, 0.2]},
    "signals": {"w": {"kind": "constant", "center": 0.1, "radius": 0.2}},
    "estimators": [{"kind": "tight"}, {"kind": "truncated", "q": 1}],
}


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


def test_verify_pass_and_json(small, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["verify", str(small), "--json", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads(out.read_text())["status"] == "pass"


def test_verify_detects_fault(small, capsys):
    assert main(["verify", str(small), "--inject-fault", "tight:4:0:5.0"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_simulate_writes_files(small, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", str(small), "-o", str(out)]) == 0
    header, lower, upper, sigma = read_run_csv(out / "tight.csv")
    assert header == ["t", "lower_1", "lower_2", "upper_1", "upper_2"]
    assert lower.shape == (9, 2) and sigma is None
    assert json.loads((out / "truncated_q1.json").read_text())["label"] == "truncated_q1"
    assert (out / "trajectory_0.csv").exists()


def test_simulate_sls_flag_rejects_lti(small):
    assert main(["simulate", str(small), "--sls"]) == 4


def test_synthesize_lti(small, tmp_path):
    out = tmp_path / "gain.json"
    assert main(["synthesize", str(small), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    A, C = np.array(SMALL["system"]["A"]), np.array(SMALL["system"]["C"])
    L = np.array(doc["gains"][0])
    assert np.max(np.abs(np.linalg.eigvals(np.abs(A - L @ C)))) < 1


def test_synthesize_infeasible(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"type": "lti", "A": [[1.5]], "B": [[1.0]], "C": [[0.0]]}))
    assert main(["synthesize", str(path), "--method", "lti"]) == 2


def test_synthesize_switched(tmp_path):
    out = tmp_path / "sls.json"
    assert main(["synthesize", str(SCEN / "switched_modes.yaml"), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["method"] == "sls-diagonal" and len(doc["gains"]) == 3


def test_realize(small, tmp_path):
    out = tmp_path / "real.json"
    assert main(["realize", str(SCEN / "open_loop.yaml"), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["realizability"]["rank"] == 6
    assert doc["realization"]["dimension"] == 6
    rows = (tmp_path / "real_ranks.csv").read_text().splitlines()
    assert rows[0] == "r,l,rows,cols,rank,ambiguous"
    assert len(rows) == 1 + len(doc["rank_table"])


def test_jsr(tmp_path):
    out = tmp_path / "jsr.json"
    assert main(["jsr", str(SCEN / "two_rotations.yaml"), "--depth", "4", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["bounds"]["lower"] <= doc["bounds"]["upper"]
    assert doc["stability"] == "certified_stable"


def test_input_errors_exit_4(tmp_path, capsys):
    assert main(["verify", str(tmp_path / "missing.yaml")]) == 4
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nname: x\n")
    assert main(["verify", str(bad)]) == 4
    assert "error:" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
