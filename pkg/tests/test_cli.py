"""CLI surface: exit codes, outputs, overrides, env seed, bench report."""

import json
import os

import pytest

from ddfed.cli import main
from ddfed.harness import CSV_HEADER

MINIMAL = {
    "dataset": {"n": 400},
    "num_clients": 4,
    "clients_per_round": 4,
    "attacker_ratio": 0.25,
    "rounds": 2,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(MINIMAL))
    return str(path)


def test_run_minimal_config(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", config_path, "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "final_accuracy=" in printed
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + MINIMAL["rounds"]


def test_run_missing_config(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_run_unknown_key_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(MINIMAL, extra_knob=1)))
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "extra_knob" in capsys.readouterr().err


def test_run_override_lands_in_manifest(tmp_path, config_path):
    out = tmp_path / "out"
    code = main(["run", "--config", config_path, "--out", str(out),
                 "--set", "dp.epsilon=0.05"])
    assert code == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["config"]["dp"]["epsilon"] == 0.05


def test_env_seed_override(tmp_path, config_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("DDFED_SEED", "777")
    code = main(["run", "--config", config_path, "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["config"]["master_seed"] == 777


def test_run_runtime_error_exit_code(tmp_path, capsys):
    # valid config whose partition starves a client at runtime
    path = tmp_path / "starved.json"
    path.write_text(json.dumps(dict(
        MINIMAL, dataset={"n": 60, "classes": 10, "d": 64},
        num_clients=50, clients_per_round=4,
    )))
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "runtime error" in capsys.readouterr().err


def test_validate_config_flags_ratio(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(MINIMAL, attacker_ratio=0.6)))
    code = main(["validate-config", "--config", str(path)])
    assert code == 1
    assert "0.5" in capsys.readouterr().out


def test_validate_config_flags_oversampling(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(MINIMAL, clients_per_round=9)))
    code = main(["validate-config", "--config", str(path)])
    assert code == 1
    assert "clients_per_round" in capsys.readouterr().out


def test_validate_config_accepts_default(config_path, capsys):
    assert main(["validate-config", "--config", config_path]) == 0
    assert "ok" in capsys.readouterr().out


def test_compare_grid_cli(tmp_path, config_path, capsys):
    out = tmp_path / "grid"
    code = main(["compare", "--config", config_path, "--out", str(out),
                 "--defenses", "fedavg,median", "--attacks", "none,ipm"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["cells"]) == 4


def test_bench_he_single_rep(tmp_path, capsys, monkeypatch):
    import ddfed.cli as cli
    from ddfed import hecore

    small = hecore.HeParams(ring_degree=1024)
    monkeypatch.setattr(hecore, "preset", lambda name: small)
    monkeypatch.setattr(cli.hecore, "preset", lambda name: small)
    out = tmp_path / "bench"
    code = main(["bench-he", "--dim", "1200", "--reps", "1",
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "bench_he.json").read_text())
    for backend in ("mock", "ckks_lite"):
        for op in ("encrypt", "inner_product", "weighted_sum"):
            assert report["ops"][backend][op]["samples"] == 1
    assert report["round_trip"]["encrypted_path_ms"] > 0
    # the mock backend is far cheaper than the real one
    assert (report["ops"]["mock"]["inner_product"]["mean_ms"]
            < report["ops"]["ckks_lite"]["inner_product"]["mean_ms"])
    # chunk count follows the packing formula: ceil(1200 / 512) at ring 1024
    assert report["chunks"] == 3
