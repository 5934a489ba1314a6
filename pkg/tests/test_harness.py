from __future__ import annotations

import json

import pytest

from polymer_lab.engine import free_energy
from polymer_lab.errors import ConfigInvalid, IoError
from polymer_lab.harness.cli import main
from polymer_lab.harness.config import load_config, parse_config
from polymer_lab.harness.oracle import validate_against_oracle
from polymer_lab.harness.runner import run_experiment, verify_manifest

CONST_MODEL = {"bulk": {"family": "constant", "value": 1.0}, "vertical": {"family": "constant", "value": 1.0}}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("data, path", [
    ({"experiment": "lln", "n_list": [10], "bogus": 1}, "bogus"),
    ({"experiment": "lln"}, "n_list"),
    ({"experiment": "lln", "n_list": [10, "x"]}, "n_list[1]"),
    ({"experiment": "lln", "n_list": [10], "model": {"bulk": {"family": "exponential", "rat": 1},
                                                      "vertical": {"family": "exponential"}}}, "model.bulk.rat"),
    ({"experiment": "lln", "n_list": [10], "model": {"bulk": {"family": "exponential", "rate": -1},
                                                      "vertical": {"family": "exponential", "rate": 1}}},
     "model.bulk"),
    ({"experiment": "lln", "n_list": [10], "mode": "lukewarm"}, "mode"),
    ({"experiment": "influence", "n": 10, "rows": [2], "x_max": 2, "B_low": 3, "B_high": 2}, "B_high"),
    ({"experiment": "nope"}, "experiment"),
    ({"experiment": "lln", "n_list": []}, "n_list"),
])
def test_config_errors_name_the_field(data, path):
    with pytest.raises(ConfigInvalid) as info:
        parse_config(data)
    assert info.value.path == path


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(bad)


def test_config_defaults_and_hash():
    a = parse_config({"experiment": "clt", "n": 100})
    assert a.replicate_count == 2000
    b = a.with_overrides(out="elsewhere", threads=3)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != a.with_overrides(seed=1).config_hash()
    assert json.loads(a.canonical())["n"] == 100 and "out" not in json.loads(a.canonical())


def test_lln_constant_run(tmp_path):
    cfg = parse_config({"experiment": "lln", "model": CONST_MODEL, "mode": "zero", "n_list": [10],
                        "replicates": 3, "out": str(tmp_path / "out")})
    lines = []
    record = run_experiment(cfg, echo=lines.append)
    assert record.result[0].g_hat == pytest.approx(1.1)
    assert record.exit_status == 0 and lines and lines[0].startswith("lln: ")
    assert verify_manifest(tmp_path / "out")
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.config_hash() and manifest["seed"] == 0
    raw = (tmp_path / "out" / "summary.csv").read_bytes()
    assert raw.startswith(b"n,mode,") and b"\r\n" in raw


def test_manifest_detects_tampering(tmp_path):
    cfg = parse_config({"experiment": "midpoint", "n": 10, "k_list": [0, 2], "replicates": 2,
                        "out": str(tmp_path)})
    run_experiment(cfg, echo=None)
    with open(tmp_path / "replicates.csv", "ab") as fh:
        fh.write(b"0,0,0,0\r\n")
    assert not verify_manifest(tmp_path)


def test_results_identical_across_threads_and_reruns(tmp_path):
    base = {"experiment": "variance", "n_list": [10, 20], "replicates": 100, "seed": 11}
    outputs = []
    for i, threads in enumerate((1, 2, 1)):
        cfg = parse_config({**base, "threads": threads, "out": str(tmp_path / f"r{i}")})
        run_experiment(cfg, echo=None)
        outputs.append((tmp_path / f"r{i}" / "replicates.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_dump_env_roundtrip(tmp_path):
    from polymer_lab.environment import load_snapshot

    cfg = parse_config({"experiment": "pinning", "n": 12, "s1": 2, "s2_list": [4], "replicates": 3,
                        "out": str(tmp_path)})
    record = run_experiment(cfg, dump_env=[1], echo=None)
    assert "env-1.hspe" in record.files and not (tmp_path / "env-0.hspe").exists()
    env = load_snapshot(tmp_path / "env-1.hspe")
    assert env.weight(0, 0) == record.result.env_source.environment(1).weight(0, 0)


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = parse_config({"experiment": "midpoint", "n": 10, "k_list": [0], "replicates": 1,
                        "out": str(blocker / "sub")})
    with pytest.raises(IoError):
        run_experiment(cfg, echo=None)


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, {"experiment": "validate", "instance_count": 0})
    assert main(["validate", "--config", str(good), "--out", str(tmp_path / "v")]) == 0
    bad = _write(tmp_path, {"experiment": "lln", "n_list": [10], "extra": True}, "bad.json")
    assert main(["lln", "--config", str(bad)]) == 2
    assert "extra" in capsys.readouterr().err
    mismatch = _write(tmp_path, {"experiment": "lln", "n_list": [10]}, "m.json")
    assert main(["clt", "--config", str(mismatch)]) == 2
    odd = _write(tmp_path, {"experiment": "lln", "n_list": [9], "replicates": 2}, "odd.json")
    assert main(["lln", "--config", str(odd), "--out", str(tmp_path / "o")]) == 1


def test_cli_overrides(tmp_path, capsys):
    cfg = _write(tmp_path, {"experiment": "lln", "n_list": [10], "model": CONST_MODEL, "mode": "zero"})
    out = tmp_path / "o"
    assert main(["lln", "--config", str(cfg), "--out", str(out), "--seed", "4", "--replicates", "2",
                 "--threads", "1"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["config"]["replicates"] == 2
    assert "g_hat=1.1" in capsys.readouterr().out


def test_oracle_empty_and_small():
    assert validate_against_oracle(instance_count=0).passed
    report = validate_against_oracle(seed=1, instance_count=20, sampler_instances=2, sampler_draws=20_000,
                                     coupling_instances=1, coupling_draws=500)
    assert report.passed, report.lines()


def test_oracle_flags_corrupted_engine():
    def broken(query, env):
        return -free_energy(query, env)

    report = validate_against_oracle(seed=2, instance_count=10, free_energy_fn=broken,
                                     checks=("free_energy",))
    assert not report.passed
