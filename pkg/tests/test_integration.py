"""Cross-module integration: IDX-backed experiments, client subsampling on
the encrypted path, noise-sharing variants, and manifest stability."""

import dataclasses
import json
import struct

import numpy as np
import pytest

from ddfed import hecore
from ddfed.harness import (
    DatasetSpec,
    ExperimentConfig,
    compare_grid,
    run_experiment,
)
from ddfed.model import ModelArch
from ddfed.protocol import DpConfig, run_round, server_score, client_produce_update
from tests.test_protocol import _mk_world, _msgs_from, _prime_cache


def _write_idx(tmp_path, n=300, side=8, classes=5, seed=0):
    rng = np.random.default_rng(seed)
    labels = (np.arange(n) % classes).astype(np.uint8)
    images = np.zeros((n, side, side), dtype=np.uint8)
    for i, c in enumerate(labels):
        images[i] = rng.integers(0, 40, (side, side))
        images[i, c, :] = 200 + rng.integers(0, 40, side)
    order = rng.permutation(n)
    images, labels = images[order], labels[order]
    ip, lp = tmp_path / "train-images.idx", tmp_path / "train-labels.idx"
    with open(ip, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, side, side))
        f.write(images.tobytes())
    with open(lp, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())
    return str(ip), str(lp)


def test_idx_experiment_with_holdout(tmp_path):
    ip, lp = _write_idx(tmp_path)
    cfg = ExperimentConfig(
        dataset=DatasetSpec(kind="mnist_idx", images=ip, labels=lp),
        arch=ModelArch((64, 16, 5)),
        num_clients=4, clients_per_round=4, attacker_ratio=0.25,
        rounds=8,
    )
    rows = run_experiment(cfg)
    assert len(rows) == 8
    assert rows[-1].test_accuracy > 0.5  # strong per-class stripe signal


def test_idx_experiment_with_test_files(tmp_path):
    ip, lp = _write_idx(tmp_path, n=300, seed=1)
    tip, tlp = _write_idx_to(tmp_path, "test", n=80, seed=2)
    cfg = ExperimentConfig(
        dataset=DatasetSpec(kind="mnist_idx", images=ip, labels=lp,
                            test_images=tip, test_labels=tlp),
        arch=ModelArch((64, 16, 5)),
        num_clients=4, clients_per_round=4, attacker_ratio=0.25,
        rounds=4,
    )
    rows = run_experiment(cfg)
    assert len(rows) == 4


def _write_idx_to(tmp_path, prefix, n, seed):
    sub = tmp_path / prefix
    sub.mkdir(exist_ok=True)
    return _write_idx(sub, n=n, seed=seed)


def test_ddfed_with_client_subsampling():
    """k < m: unsampled clients keep stale state and rejoin cleanly."""
    cfg = ExperimentConfig(
        dataset=DatasetSpec(n=1200),
        num_clients=6, clients_per_round=4, attacker_ratio=0.3,
        rounds=10,
        defense=dataclasses.replace(ExperimentConfig().defense,
                                    kind="ddfed"),
        attack=dataclasses.replace(ExperimentConfig().attack, kind="ipm",
                                   start_round=4),
    )
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert len(a) == 10
    for ra, rb in zip(a, b):
        assert ra.test_accuracy == rb.test_accuracy
        assert ra.selected == rb.selected
        assert len(ra.sampled) == 4


def test_shared_noise_shifts_all_scores_equally():
    """Default shared perturbation: every client's score moves by the same
    amount, so mean-threshold selection is unaffected by the noise draw."""
    dp = DpConfig(epsilon=0.05, enabled=True)
    clients, server, _ = _mk_world(m=4, dp=dp)
    _prime_cache(clients, server)
    msgs = _msgs_from(clients, server, 2)
    clean_server = dataclasses.replace(server, dp=DpConfig(enabled=False))
    clean = hecore.decrypt_vec(
        clients[0].keys, server_score(clean_server, msgs,
                                      np.random.default_rng(0)))
    noisy = hecore.decrypt_vec(
        clients[0].keys, server_score(server, msgs,
                                      np.random.default_rng(7)))
    devs = noisy - clean
    assert np.abs(devs - devs[0]).max() < 1e-12


def test_per_client_noise_shifts_scores_independently():
    dp = DpConfig(epsilon=0.05, enabled=True, per_client_noise=True)
    clients, server, _ = _mk_world(m=4, dp=dp)
    _prime_cache(clients, server)
    msgs = _msgs_from(clients, server, 2)
    clean_server = dataclasses.replace(server, dp=DpConfig(enabled=False))
    clean = hecore.decrypt_vec(
        clients[0].keys, server_score(clean_server, msgs,
                                      np.random.default_rng(0)))
    noisy = hecore.decrypt_vec(
        clients[0].keys, server_score(server, msgs,
                                      np.random.default_rng(7)))
    devs = noisy - clean
    assert np.abs(devs - devs[0]).max() > 1e-6


def test_manifest_byte_identical_across_reruns(tmp_path):
    cfg = ExperimentConfig(dataset=DatasetSpec(n=400), num_clients=4,
                           clients_per_round=4, attacker_ratio=0.25,
                           rounds=2)
    compare_grid(cfg, ["fedavg"], ["none", "ipm"], str(tmp_path / "a"))
    compare_grid(cfg, ["fedavg"], ["none", "ipm"], str(tmp_path / "b"))
    a = (tmp_path / "a" / "manifest.json").read_bytes()
    b = (tmp_path / "b" / "manifest.json").read_bytes()
    assert a == b


def test_wire_header_layout():
    """Serialized vectors start with the fixed little-endian header:
    magic 'DDHE', version u16, backend u8, ring u32, chunk count u32."""
    params = hecore.HeParams(ring_degree=1024)
    keys = hecore.keygen(params, seed=1, backend="mock")
    cv = hecore.encrypt_vec(keys, np.ones(700))
    blob = hecore.dump_cipher_vector(cv)
    magic, version, backend, ring, chunks = struct.unpack_from(
        "<4sHBII", blob, 0
    )
    assert magic == b"DDHE"
    assert version == 1
    assert backend == 0  # mock
    assert ring == 1024
    assert chunks == 2
