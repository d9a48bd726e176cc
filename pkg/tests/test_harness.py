"""Harness: sampling statistics, config round-trips, experiment determinism,
grid manifests, and the ground-truth isolation audit."""

import dataclasses
import json
import os

import numpy as np
import pytest

from ddfed.errors import ParameterError
from ddfed.harness import (
    CSV_HEADER,
    DatasetSpec,
    ExperimentConfig,
    apply_overrides,
    assign_malicious,
    compare_grid,
    config_from_dict,
    config_to_dict,
    preset_experiment,
    read_metrics_csv,
    run_experiment,
    sample_clients,
)

FAST = ExperimentConfig(rounds=3, dataset=DatasetSpec(n=400),
                        num_clients=4, clients_per_round=4,
                        attacker_ratio=0.25)


# ---- assignment and sampling ---------------------------------------------------

def test_assign_malicious_count_and_determinism():
    a = assign_malicious(10, 0.3, seed=5)
    b = assign_malicious(10, 0.3, seed=5)
    assert a == b
    assert len(a) == 3
    assert assign_malicious(10, 0.0, seed=5) == set()


def test_sample_clients_full_coverage():
    assert sample_clients(7, 7, 1, seed=2) == set(range(7))


def test_sample_clients_deterministic_per_round():
    assert sample_clients(100, 10, 4, seed=9) == sample_clients(100, 10, 4,
                                                                 seed=9)
    assert sample_clients(100, 10, 4, seed=9) != sample_clients(100, 10, 5,
                                                                 seed=9)


def test_sample_clients_frequency_binomial():
    m, k, rounds = 20, 5, 1000
    counts = np.zeros(m)
    for t in range(rounds):
        for c in sample_clients(m, k, t, seed=3):
            counts[c] += 1
    p = k / m
    sigma = np.sqrt(rounds * p * (1 - p))
    assert np.all(np.abs(counts - rounds * p) <= 3.5 * sigma)


# ---- config ---------------------------------------------------------------------

def test_config_dict_roundtrip():
    cfg = preset_experiment("ddfed", "ipm")
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_rejects_unknown_root_key():
    raw = config_to_dict(FAST)
    raw["typo_field"] = 1
    with pytest.raises(ParameterError, match="typo_field"):
        config_from_dict(raw)


def test_config_rejects_unknown_nested_key():
    raw = config_to_dict(FAST)
    raw["dp"]["epsilonn"] = 0.5
    with pytest.raises(ParameterError, match="epsilonn"):
        config_from_dict(raw)


def test_overrides_dotted_paths():
    cfg = apply_overrides(FAST, ["dp.epsilon=0.05", "rounds=7",
                                 "attack.kind=\"ipm\""])
    assert cfg.dp.epsilon == 0.05
    assert cfg.rounds == 7
    assert cfg.attack.kind == "ipm"


def test_overrides_reject_unknown_path():
    with pytest.raises(ParameterError):
        apply_overrides(FAST, ["dp.nope=1"])


def test_validate_flags_violations():
    bad = dataclasses.replace(FAST, attacker_ratio=0.6, clients_per_round=9)
    problems = bad.validate()
    assert any("0.5" in p for p in problems)
    assert any("clients_per_round" in p for p in problems)
    assert FAST.validate() == []


# ---- experiments -------------------------------------------------------------------

def test_run_experiment_writes_csv(tmp_path):
    path = tmp_path / "m.csv"
    metrics = run_experiment(FAST, out_csv=str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + FAST.rounds
    assert [m.round for m in metrics] == [1, 2, 3]
    parsed = read_metrics_csv(str(path))
    assert parsed[0]["round"] == 1
    assert parsed[-1]["test_accuracy"] == pytest.approx(
        metrics[-1].test_accuracy
    )


def test_run_experiment_deterministic_modulo_wallclock(tmp_path):
    a = run_experiment(FAST)
    b = run_experiment(FAST)
    for ra, rb in zip(a, b):
        assert ra.test_accuracy == rb.test_accuracy
        assert ra.test_loss == rb.test_loss
        assert ra.selected == rb.selected
        assert ra.sampled == rb.sampled


def test_detection_metrics_nullability():
    cfg = dataclasses.replace(FAST, attacker_ratio=0.0)
    for row in run_experiment(cfg):
        assert row.detection_precision is None
        assert row.detection_recall is None


def test_each_round_reported_once():
    rows = run_experiment(FAST)
    assert [r.round for r in rows] == list(range(1, FAST.rounds + 1))


@pytest.mark.parametrize("kind", ["median", "trimmed_mean",
                                  "clipping_median", "krum", "cos_defense"])
def test_baseline_defenses_run(kind):
    cfg = dataclasses.replace(
        FAST, defense=dataclasses.replace(FAST.defense, kind=kind)
    )
    rows = run_experiment(cfg)
    assert len(rows) == FAST.rounds


def test_fedavg_reaches_high_accuracy_without_attack():
    cfg = preset_experiment("fedavg", "none", rounds=20)
    rows = run_experiment(cfg)
    assert rows[-1].test_accuracy >= 0.9


def test_fedavg_collapses_under_cold_start_ipm():
    cfg = preset_experiment("fedavg", "ipm", cold_start=True, rounds=20)
    rows = run_experiment(cfg)
    assert rows[-1].test_accuracy <= 0.2


def test_compare_grid_manifest(tmp_path):
    out = tmp_path / "grid"
    manifest = compare_grid(FAST, ["fedavg", "median"], ["none", "ipm"],
                            str(out))
    assert len(manifest["cells"]) == 4
    files = sorted(os.listdir(out))
    assert "manifest.json" in files
    assert len([f for f in files if f.endswith(".csv")]) == 4
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["cells"][0]["config"]["rounds"] == FAST.rounds
    for cell in on_disk["cells"]:
        assert cell["status"] == "ok"
        assert (out / cell["metrics_path"]).exists()


def test_compare_grid_resume_skips_existing(tmp_path):
    out = tmp_path / "grid"
    compare_grid(FAST, ["fedavg"], ["none"], str(out))
    marker = (out / "fedavg__none.csv")
    stamp = marker.stat().st_mtime_ns
    manifest = compare_grid(FAST, ["fedavg"], ["none"], str(out),
                            resume=True)
    assert manifest["cells"][0]["status"] == "skipped_existing"
    assert marker.stat().st_mtime_ns == stamp


def test_ground_truth_isolation_audit():
    """No defense-side module may read the harness's ground-truth labels."""
    import ddfed

    root = os.path.dirname(ddfed.__file__)
    for mod in ("aggregators.py", "protocol.py", "attacks.py",
                "hecore/api.py", "hecore/ckks.py", "hecore/mock.py"):
        with open(os.path.join(root, mod)) as fh:
            source = fh.read()
        assert "true_malicious" not in source, mod
        assert "detection_precision" not in source, mod
