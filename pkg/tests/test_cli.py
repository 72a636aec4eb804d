import json
import subprocess
import sys
from importlib import resources

import pytest

from mildatlas.cli import run_cli

FAMILIES = resources.files("mildatlas") / "families"


def family_path(name):
    return str(FAMILIES / f"{name}.json")


@pytest.fixture
def sqrt_family(tmp_path):
    p = tmp_path / "sqrt.json"
    p.write_text(json.dumps({"name": "sqrt", "k": 0, "m": 1, "n": 2, "T": [],
                             "components": [{"terms": [{"a": "1", "mu": ["1/2"]}], "unit": "1", "j": 1}]}))
    return str(p)


def test_atlas_then_verify(tmp_path, capsys):
    out = tmp_path / "atlas.json"
    assert run_cli(["atlas", family_path("hyperbola"), "--t", "0.5", "--r", "4", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["counts"]["charts"] == doc["counts"]["predicted"]
    rep = tmp_path / "report.json"
    assert run_cli(["verify", str(out), "--samples", "64", "--coverage", "50", "-o", str(rep)]) == 0
    assert json.loads(rep.read_text())["verdict"] == "pass"
    assert "pass" in capsys.readouterr().err


def test_verify_fails_on_tampered_atlas(tmp_path):
    out = tmp_path / "atlas.json"
    run_cli(["atlas", family_path("hyperbola"), "--t", "0.5", "--r", "2", "-o", str(out)])
    doc = json.loads(out.read_text())
    doc["charts"]["components"][1] = f"100*({doc['charts']['components'][1]})"
    out.write_text(json.dumps(doc))
    assert run_cli(["verify", str(out), "--samples", "32", "-o", str(tmp_path / "r.json")]) == 1


def test_certify(tmp_path, sqrt_family):
    rep = tmp_path / "c.json"
    assert run_cli(["certify", family_path("synthetic2"), "--improved", "--r", "2", "-o", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["sections"]["certificate"]["verdict"] == "pass" and doc["audit"]
    assert run_cli(["certify", sqrt_family, "-o", str(rep)]) == 1
    assert json.loads(rep.read_text())["sections"]["c1_bounded"]["verdict"] == "fail"


def test_atlas_refusal_exits_one(sqrt_family, tmp_path):
    assert run_cli(["atlas", sqrt_family, "--r", "2", "-o", str(tmp_path / "a.json")]) == 1


@pytest.mark.parametrize("argv", [
    ["atlas", "/nonexistent.json", "--r", "2"],
    ["atlas", family_path("bad_unit"), "--r", "2"],
    ["atlas", family_path("hyperbola"), "--t", "0.99", "--r", "2"],
    ["atlas", family_path("hyperbola"), "--t", "abc", "--r", "2"],
    ["growth", family_path("hyperbola"), "--r-min", "2", "--r-max", "3"],
    ["atlas", family_path("hyperbola")],
    ["frobnicate"],
])
def test_input_errors_exit_two(argv, capsys):
    assert run_cli(argv) == 2


def test_growth(tmp_path):
    rep = tmp_path / "g.json"
    assert run_cli(["growth", family_path("hyperbola"), "--t", "0.5", "--r-max", "5", "-o", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert len(doc["growth"]) == 4 and doc["sections"]["fit"]["slope"] <= 1.3


def test_selftest_via_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mildatlas", "selftest", "-q"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
