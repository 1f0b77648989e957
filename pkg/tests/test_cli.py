import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from alpertlab.cli import main, run, validate_config, ConfigError

REPO = Path(__file__).resolve().parents[1]
SMOKE = REPO / "configs" / "smoke.cfg"

EXPECTED_CSVS = {
    "basis_checks.csv",
    "norm_equivalence.csv",
    "goodbad.csv",
    "constants.csv",
    "t1.csv",
    "corona.csv",
    "energy.csv",
}


def _tiny_config(tmp_path, seed=7):
    cfg = {
        "seed": seed,
        "experiments": [
            {"kind": "basis_checks", "n": 1, "depth": 3, "kappas": [1]},
            {"kind": "goodbad", "eps_values": [0.5], "r_values": [2, 3], "depth_gap": 5,
             "trials": 200},
        ],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_smoke_config_runs(tmp_path):
    out = tmp_path / "out"
    assert run(SMOKE, out) == 0
    names = {p.name for p in out.iterdir()}
    assert EXPECTED_CSVS <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == json.loads(SMOKE.read_text())["seed"]
    assert all(e["status"] == "ok" for e in manifest["experiments"])


def test_byte_identical_reruns(tmp_path):
    cfg = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(cfg, out1) == 0
    assert run(cfg, out2) == 0
    for name in ("basis_checks.csv", "goodbad.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_jobs_do_not_change_bytes(tmp_path):
    cfg = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "seq", tmp_path / "par"
    assert run(cfg, out1, jobs=1) == 0
    assert run(cfg, out2, jobs=2) == 0
    for name in ("basis_checks.csv", "goodbad.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_override_changes_outputs(tmp_path):
    cfg = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run(cfg, out1, seed=1) == 0
    assert run(cfg, out2, seed=2) == 0
    assert (out1 / "goodbad.csv").read_bytes() != (out2 / "goodbad.csv").read_bytes()


def test_empty_experiments_manifest_only(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 0, "experiments": []}))
    out = tmp_path / "out"
    assert run(path, out) == 0
    assert {p.name for p in out.iterdir()} == {"manifest.json"}


def test_unknown_kernel_family_rejected():
    with pytest.raises(ConfigError, match="family"):
        validate_config(
            {"experiments": [{"kind": "t1", "pairs": [], "kernels": [{"alpha": 0.0, "family": "nope"}]}]}
        )


def test_unknown_measure_kind_rejected():
    with pytest.raises(ConfigError, match="kind"):
        validate_config({"experiments": [{"kind": "corona", "sigma": {"kind": "gauss"}, "omega": {"kind": "lebesgue"}}]})


def test_invalid_json_line_numbered(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "experiments": [\n')
    assert run(bad, tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "bad.json:3" in err


def test_missing_config(tmp_path, capsys):
    assert run(tmp_path / "none.json", tmp_path / "o") == 2
    assert "does not exist" in capsys.readouterr().err


def test_failed_experiment_recorded(tmp_path):
    cfg = {
        "seed": 1,
        "experiments": [
            # delta below resolution: per-experiment failure, run continues
            {"kind": "constants", "n": 1, "depth": 3, "sigma": {"kind": "lebesgue"},
             "omega": {"kind": "lebesgue"}, "alpha": 0.5, "s": 0.0, "delta": 1e-6},
            {"kind": "basis_checks", "n": 1, "depth": 3, "kappas": [1]},
        ],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert run(path, out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    statuses = {e["index"]: e["status"] for e in manifest["experiments"]}
    assert statuses[0] == "failed" and statuses[1] == "ok"
    assert (out / "basis_checks.csv").exists()
    assert not (out / "constants.csv").exists()


def test_env_var_overrides(tmp_path):
    cfg = _tiny_config(tmp_path)
    out = tmp_path / "env_out"
    env = dict(os.environ)
    env.update({
        "ALPERTLAB_CONFIG": str(cfg),
        "ALPERTLAB_OUT": str(out),
        "ALPERTLAB_SEED": "42",
    })
    proc = subprocess.run(
        [sys.executable, "-m", "alpertlab.cli"], env=env, capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42


def test_main_entry_point(tmp_path):
    cfg = _tiny_config(tmp_path)
    out = tmp_path / "main_out"
    assert main(["--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    assert (out / "manifest.json").exists()
