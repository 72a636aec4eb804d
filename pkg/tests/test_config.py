import json

import pytest
from hypothesis import given, strategies as st

from mildatlas.cli import run_cli
from mildatlas.config import AtlasConfig, VerifyConfig
from mildatlas.harness import DEFAULT_SAMPLES

from test_cli import family_path


def test_defaults_and_validation():
    assert VerifyConfig().samples == DEFAULT_SAMPLES
    assert AtlasConfig().mode == "standard"
    for bad in (dict(r=0), dict(mode="fancy"), dict(depth=-1)):
        with pytest.raises(ValueError):
            AtlasConfig(**bad)
    for bad in (dict(samples=0), dict(margin=0.5), dict(tol=-1), dict(coverage=-3)):
        with pytest.raises(ValueError):
            VerifyConfig(**bad)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="samplez"):
        VerifyConfig.from_mapping({"samplez": 3})


def test_merged_ignores_none():
    cfg = VerifyConfig(samples=10).merged(samples=None, seed=4)
    assert (cfg.samples, cfg.seed) == (10, 4)


@given(st.integers(1, 10 ** 4), st.floats(0, 0.49), st.integers(0, 100), st.integers(1, 500))
def test_json_round_trip(samples, margin, seed, max_charts):
    cfg = VerifyConfig(samples, margin, 1e-9, seed, max_charts)
    assert VerifyConfig.from_mapping(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_cli_reads_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"atlas": {"r": 3}, "verify": {"samples": 40, "coverage": 20}}))
    out, rep = tmp_path / "a.json", tmp_path / "r.json"
    assert run_cli(["atlas", family_path("hyperbola"), "--config", str(cfg), "-o", str(out)]) == 0
    assert json.loads(out.read_text())["r"] == 3
    assert run_cli(["verify", str(out), "--config", str(cfg), "--seed", "5", "-o", str(rep)]) == 0
    meta = json.loads(rep.read_text())["meta"]
    assert (meta["samples"], meta["seed"]) == (40, 5)
    cfg.write_text(json.dumps({"verify": {"samples": -1}}))
    assert run_cli(["verify", str(out), "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert run_cli(["verify", str(out), "--config", str(cfg)]) == 2
