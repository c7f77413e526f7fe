import csv
import json

import numpy as np
import pytest

from volterra_spde.cli import UsageError, emit_report, parse_modes, run_command
from volterra_spde.config import BUILTINS, ConfigError, ExperimentConfig, builtin_config, load_config


def small_config(tmp_path, **over):
    cfg = {"basis": {"N": 4, "q": 1.0}, "noise": {"n_paths": 200, "dt": 0.01},
           "nonlinearity": {"name": "sine", "params": {"L": 1.0}},
           "grid": {"T": 0.5, "times": [0.25, 0.5], "n_states": 5, "n_intervals": 400},
           "control": {"problem": "lq", "params": {"T": 1.0}, "n_paths": 2000, "n_steps": 20, "m_random": 3}}
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_modes():
    assert parse_modes("1..4") == [1, 2, 3, 4]
    assert parse_modes("2-3,7") == [2, 3, 7]
    for bad in ("0..3", "4..2", "a", ""):
        with pytest.raises(UsageError):
            parse_modes(bad)


def test_builtins_are_valid():
    for name in BUILTINS:
        cfg = builtin_config(name)
        assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_schema_errors_are_itemised():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"kernel": {"type": "gaussian", "k0": -1}, "colour": 1, "basis": {"M": 3}})
    joined = " ".join(info.value.problems)
    assert len(info.value.problems) >= 4
    for word in ("colour", "M", "kernel.type", "k0"):
        assert word in joined


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run_command(["resolvent", "--bogus"]) == 2
    assert run_command(["integrate"]) == 2
    assert run_command(["resolvent", "--modes", "x", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"noise": {"n_paths": 0, "dt": -1}}))
    assert run_command(["simulate", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "noise.n_paths" in err and "noise.dt" in err
    assert run_command(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_validate_kernel_exit_0(tmp_path):
    assert run_command(["validate-kernel", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "validate-kernel_summary.json").read_text())
    assert doc["passed"] and doc["summary"]["sectoriality"]["theta"] > 0


def test_failed_kernel_validation_exits_1(tmp_path):
    t = np.linspace(0.01, 5.0, 200)
    cfg = tmp_path / "k.json"
    # e^{-t^2} is decreasing but -k1' is not nonincreasing near 0
    cfg.write_text(json.dumps({"kernel": {"type": "table", "parameters": {"t": t.tolist(),
                                                                          "k1": np.exp(-t * t).tolist()}}}))
    assert run_command(["validate-kernel", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_unbuildable_kernel_exits_2(tmp_path, capsys):
    cfg = tmp_path / "k.json"
    cfg.write_text(json.dumps({"kernel": {"type": "exponential", "parameters": {"amplitude": -1.0, "rate": 1.0}}}))
    assert run_command(["validate-kernel", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "amplitude" in capsys.readouterr().err


def test_heat_resolvent_csv_matches_exponentials(tmp_path):
    assert run_command(["resolvent", "--config", "heat", "--modes", "1..4", "--out", str(tmp_path)]) == 0
    for j in range(1, 5):
        rows = read_csv(tmp_path / f"resolvent_mode_{j}.csv")
        t = np.array([float(r["t"]) for r in rows])
        s = np.array([float(r["s"]) for r in rows])
        assert np.max(np.abs(s - np.exp(-j * j * t))) < 1e-8
    est = json.loads((tmp_path / "resolvent_estimates.json").read_text())
    assert sorted(est) == ["1", "2", "3", "4"]
    assert {r["quantity"] for r in read_csv(tmp_path / "resolvent_slopes.csv")} >= {"int_abs_s", "double_square_T"}


def test_empty_report(tmp_path):
    assert run_command(["report", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text()) == {"families": {}, "missing": []}


def test_partial_report_lists_missing(tmp_path):
    assert run_command(["validate-kernel", "--out", str(tmp_path)]) == 0
    rep = emit_report(tmp_path)
    assert list(rep["families"]) == ["kernel"]
    assert "control" in rep["missing"]


def test_control_benchmark_writes_riccati_table(tmp_path):
    assert run_command(["control", "--config", small_config(tmp_path), "--benchmark", "lq",
                        "--out", str(tmp_path)]) in (0, 1)
    names = {r["quantity"] for r in read_csv(tmp_path / "control_riccati.csv")}
    assert names == {"Y0", "feedback_rollout", "riccati_feedback_rollout"}
    assert read_csv(tmp_path / "control_gain.csv")


@pytest.mark.parametrize("command", ["simulate", "covariance", "control", "semigroup"])
def test_manifest_rerun_is_byte_identical(tmp_path, command):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run_command([command, "--config", small_config(tmp_path), "--workers", "1", "--out", str(first)]) in (0, 1)
    manifest = first / f"{command}_manifest.json"
    cfg, cmd = load_config(manifest)
    assert cmd == command and cfg.workers == 1
    assert run_command([command, "--config", str(manifest), "--workers", "3", "--out", str(second)]) in (0, 1)
    outputs = json.loads(manifest.read_text())["outputs"]
    assert outputs
    for name in outputs:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
