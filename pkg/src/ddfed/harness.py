"""Experiment orchestration: client sampling, malicious assignment,
multi-round execution across defenses, metric capture, and persistence.

Baselines run on a plaintext path (no HE), exactly as they are usually
benchmarked; the dual-defense protocol routes through the full encrypted
round. Every random draw is a named substream of master_seed, so the
entire output is a pure function of the config (wall-clock timings aside).
"""

import csv
import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional, Set

import numpy as np

from . import aggregators, hecore, protocol
from .attacks import AdversaryView, AttackSpec, alie_update, ipm_update, scaling_update
from .data import Dataset, PartitionSpec, load_idx, partition_noniid, synth_dataset
from .errors import DataError, ParameterError, ProtocolError
from .model import (
    ModelArch,
    ParamVector,
    TrainConfig,
    evaluate,
    init_model,
    last_layer,
    train_local,
)
from .protocol import DpConfig
from .rng import substream, substream_seed

CSV_HEADER = (
    "round,test_accuracy,test_loss,wall_ms,selected,sampled,"
    "true_malicious,precision,recall"
)


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "synth"
    n: int = 2000
    classes: int = 10
    d: int = 64
    separation: float = 3.0
    seed: Optional[int] = None
    images: Optional[str] = None
    labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("synth", "mnist_idx"):
            raise ParameterError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "mnist_idx" and not (self.images and self.labels):
            raise ParameterError("mnist_idx needs images and labels paths")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    arch: ModelArch = field(default_factory=lambda: ModelArch((64, 32, 10)))
    num_clients: int = 10
    clients_per_round: int = 10
    rounds: int = 30
    attacker_ratio: float = 0.3
    attack: AttackSpec = field(default_factory=lambda: AttackSpec(start_round=10))
    defense: aggregators.AggregatorKind = field(
        default_factory=aggregators.AggregatorKind
    )
    dp: DpConfig = field(default_factory=DpConfig)
    he_backend: str = "mock"
    he_preset: str = "desk"
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    clip_tau: float = 1.0
    ddfed_rescale: object = "own_update_norm"
    test_fraction: float = 0.2
    master_seed: int = 0

    def __post_init__(self):
        if self.partition.num_clients != self.num_clients:
            object.__setattr__(
                self, "partition",
                dataclasses.replace(self.partition,
                                    num_clients=self.num_clients),
            )

    def validate(self) -> List[str]:
        """All invariant violations, one message each; empty when valid."""
        problems = []
        if not self.attacker_ratio < 0.5:
            problems.append(
                f"attacker_ratio {self.attacker_ratio} violates the < 0.5 "
                "corruption bound"
            )
        if self.attacker_ratio < 0:
            problems.append("attacker_ratio must be non-negative")
        if self.clients_per_round > self.num_clients:
            problems.append(
                f"clients_per_round {self.clients_per_round} exceeds "
                f"num_clients {self.num_clients}"
            )
        if self.clients_per_round < 1:
            problems.append("clients_per_round must be >= 1")
        if self.num_clients < 2:
            problems.append("num_clients must be >= 2")
        if self.rounds < 1:
            problems.append("rounds must be >= 1")
        if self.he_backend not in hecore.BACKENDS:
            problems.append(f"unknown he_backend {self.he_backend!r}")
        if self.he_preset not in ("desk", "secure"):
            problems.append(f"unknown he_preset {self.he_preset!r}")
        if not 0 < self.test_fraction < 1:
            problems.append("test_fraction must lie in (0, 1)")
        return problems


@dataclass
class RoundMetrics:
    round: int
    test_accuracy: float
    test_loss: float
    wall_ms: float
    selected: Set[int]
    sampled: Set[int]
    true_malicious_in_round: Set[int]
    detection_precision: Optional[float]
    detection_recall: Optional[float]

    def csv_row(self) -> str:
        def ids(s):
            return ";".join(str(i) for i in sorted(s))

        def opt(x):
            return "" if x is None else f"{x:.6f}"

        return (
            f"{self.round},{self.test_accuracy:.6f},{self.test_loss:.6f},"
            f"{self.wall_ms:.3f},{ids(self.selected)},{ids(self.sampled)},"
            f"{ids(self.true_malicious_in_round)},"
            f"{opt(self.detection_precision)},{opt(self.detection_recall)}"
        )


# ---------------------------------------------------------------------------
# config (de)serialization: strict field mirroring
# ---------------------------------------------------------------------------

_SECTION_TYPES = {
    "dataset": DatasetSpec,
    "arch": ModelArch,
    "attack": AttackSpec,
    "defense": aggregators.AggregatorKind,
    "dp": DpConfig,
    "partition": PartitionSpec,
    "train": TrainConfig,
}


def _build_section(cls, payload: dict, path: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - allowed
    if unknown:
        raise ParameterError(
            f"unknown key(s) {sorted(unknown)} under {path!r}"
        )
    if cls is ModelArch and "layer_dims" in payload:
        payload = dict(payload, layer_dims=tuple(payload["layer_dims"]))
    return cls(**payload)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ParameterError("config root must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ParameterError(f"unknown key(s) {sorted(unknown)} in config")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ParameterError(f"{key!r} must be a JSON object")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    # a partition client count set explicitly in the file must agree with
    # the experiment's (it is auto-synced otherwise)
    if isinstance(raw.get("partition"), dict) and "num_clients" in raw[
        "partition"
    ]:
        cfg_m = kwargs.get("num_clients",
                           ExperimentConfig.__dataclass_fields__[
                               "num_clients"].default)
        if raw["partition"]["num_clients"] != cfg_m:
            raise ParameterError(
                "partition.num_clients must equal num_clients "
                f"({raw['partition']['num_clients']} != {cfg_m})"
            )
    return ExperimentConfig(**kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = dataclasses.asdict(value)
            if f.name == "arch":
                out[f.name]["layer_dims"] = list(value.layer_dims)
        else:
            out[f.name] = value
    return out


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParameterError(f"config is not valid JSON: {e}") from e
    return config_from_dict(raw)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply dotted-path key=value overrides (values parsed as JSON)."""
    raw = config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ParameterError(f"override {item!r} is not key=value")
        key, _, value = item.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ParameterError(f"unknown override path {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ParameterError(f"unknown override key {key!r}")
        node[parts[-1]] = parsed
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# sampling and assignment
# ---------------------------------------------------------------------------

def assign_malicious(m: int, ratio: float, seed: int) -> Set[int]:
    """Fixed set of floor(ratio*m) corrupted ids, constant across rounds."""
    count = int(np.floor(ratio * m))
    rng = np.random.default_rng(seed)
    return set(int(i) for i in rng.choice(m, size=count, replace=False))


def sample_clients(m: int, k: int, round_index: int, seed: int) -> Set[int]:
    """Uniform without replacement; pure function of (seed, round)."""
    rng = substream(seed, "sample", round_index)
    return set(int(i) for i in rng.choice(m, size=k, replace=False))


# ---------------------------------------------------------------------------
# data plumbing
# ---------------------------------------------------------------------------

def _load_data(cfg: ExperimentConfig):
    ds = cfg.dataset
    if ds.kind == "synth":
        seed = ds.seed if ds.seed is not None else substream_seed(
            cfg.master_seed, "data"
        )
        full = synth_dataset(ds.n, ds.classes, ds.d, seed, ds.separation)
        return _holdout_split(full, cfg)
    train = load_idx(ds.images, ds.labels)
    if ds.test_images and ds.test_labels:
        return train, load_idx(ds.test_images, ds.test_labels)
    return _holdout_split(train, cfg)


def _holdout_split(full: Dataset, cfg: ExperimentConfig):
    rng = substream(cfg.master_seed, "split")
    order = rng.permutation(len(full))
    n_test = max(1, int(len(full) * cfg.test_fraction))
    return full.subset(order[n_test:]), full.subset(order[:n_test])


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig,
                   out_csv: Optional[str] = None) -> List[RoundMetrics]:
    """Execute the configured experiment; optionally persist metrics
    incrementally as CSV."""
    problems = cfg.validate()
    if problems:
        raise ParameterError("; ".join(problems))
    train_data, test_data = _load_data(cfg)
    parts = partition_noniid(
        train_data,
        dataclasses.replace(
            cfg.partition,
            num_clients=cfg.num_clients,
            seed=(cfg.partition.seed
                  or substream_seed(cfg.master_seed, "partition")),
        ),
    )
    for i, p in enumerate(parts):
        if len(p) == 0:
            raise DataError(f"client {i} received an empty partition")
    malicious = assign_malicious(
        cfg.num_clients, cfg.attacker_ratio,
        substream_seed(cfg.master_seed, "malicious"),
    )
    w0 = init_model(cfg.arch, substream_seed(cfg.master_seed, "init"))
    train_base = dataclasses.replace(
        cfg.train, seed=substream_seed(cfg.master_seed, "train",
                                       cfg.train.seed)
    )

    writer = _MetricsWriter(out_csv) if out_csv else None
    metrics: List[RoundMetrics] = []
    runner = (_DdfedRunner if cfg.defense.kind == "ddfed"
              else _PlaintextRunner)(cfg, parts, malicious, w0, train_base)
    try:
        for t in range(1, cfg.rounds + 1):
            sampled = sample_clients(
                cfg.num_clients, cfg.clients_per_round, t,
                substream_seed(cfg.master_seed, "sampling"),
            )
            t0 = time.perf_counter()
            try:
                selected_global = runner.run_round(t, sorted(sampled))
            except Exception as e:
                raise ProtocolError(f"round {t}: {e}") from e
            wall_ms = (time.perf_counter() - t0) * 1000.0
            acc, loss = evaluate(runner.global_model(), test_data)
            row = _metrics_row(t, acc, loss, wall_ms, selected_global,
                               sampled, malicious)
            metrics.append(row)
            if writer:
                writer.write(row)
    finally:
        if writer:
            writer.close()
    return metrics


def _metrics_row(t, acc, loss, wall_ms, selected, sampled,
                 malicious) -> RoundMetrics:
    sampled_mal = sampled & malicious
    excluded = sampled - selected
    if sampled_mal:
        tp = len(excluded & malicious)
        precision = tp / len(excluded) if excluded else None
        recall = tp / len(sampled_mal)
    else:
        precision = None
        recall = None
    return RoundMetrics(
        round=t, test_accuracy=acc, test_loss=loss, wall_ms=wall_ms,
        selected=selected, sampled=sampled,
        true_malicious_in_round=sampled_mal,
        detection_precision=precision, detection_recall=recall,
    )


class _MetricsWriter:
    def __init__(self, path: str):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.fh = open(path, "w")
        self.fh.write(CSV_HEADER + "\n")
        self.fh.flush()

    def write(self, row: RoundMetrics):
        self.fh.write(row.csv_row() + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


class _PlaintextRunner:
    """Baseline path: plaintext updates into a robust aggregation rule."""

    def __init__(self, cfg, parts, malicious, w0, train_base):
        self.cfg = cfg
        self.parts = parts
        self.malicious = malicious
        self.globe = w0
        self.train_base = train_base

    def global_model(self) -> ParamVector:
        return self.globe

    def run_round(self, t: int, sampled: List[int]) -> Set[int]:
        cfg = self.cfg
        updates = []
        for cid in sampled:
            tc = dataclasses.replace(
                self.train_base,
                seed=substream_seed(self.train_base.seed, "train", cid, t),
            )
            updates.append(train_local(self.globe, self.parts[cid], tc))
        mal_local = [i for i, cid in enumerate(sampled)
                     if cid in self.malicious]
        if mal_local and cfg.attack.active(t):
            view = AdversaryView([updates[i] for i in mal_local], t)
            for i in mal_local:
                updates[i] = self._attack_payload(updates[i], view,
                                                  len(sampled),
                                                  len(mal_local))
        sizes = [len(self.parts[cid]) for cid in sampled]
        selected_local = set(range(len(sampled)))
        kind = cfg.defense.kind
        if kind == "fedavg":
            new_globe = aggregators.fedavg(updates, sizes)
        elif kind == "median":
            new_globe = aggregators.coord_median(updates)
        elif kind == "trimmed_mean":
            beta = cfg.defense.params.get("beta", cfg.attacker_ratio)
            new_globe = aggregators.trimmed_mean(updates, beta)
        elif kind == "clipping_median":
            new_globe = aggregators.clipping_median(updates)
        elif kind == "krum":
            f = int(cfg.defense.params.get("f", len(mal_local)))
            f = max(0, min(f, len(sampled) - 3))
            new_globe = aggregators.krum(updates, f)
            winner = next(
                i for i, u in enumerate(updates)
                if np.array_equal(u.values, new_globe.values)
            )
            selected_local = {winner}
        elif kind == "cos_defense":
            ref = last_layer(self.globe)
            scores = aggregators.cosine_scores(updates, ref)
            selected_local = {
                int(i) for i in np.nonzero(scores >= scores.mean())[0]
            }
            new_globe = aggregators.cos_defense(updates, ref, sizes)
        else:
            raise ParameterError(f"unsupported plaintext defense {kind!r}")
        self.globe = new_globe
        return {sampled[i] for i in selected_local}

    def _attack_payload(self, honest, view, n_round, n_corrupt):
        atk = self.cfg.attack
        if atk.kind == "ipm":
            return ipm_update(view, atk.ipm_eps)
        if atk.kind == "alie":
            return alie_update(view, n_round, n_corrupt, atk.alie_z_override)
        if atk.kind == "scaling":
            return scaling_update(honest, self.globe, atk.scaling_gamma)
        return honest


class _DdfedRunner:
    """Full encrypted protocol path."""

    def __init__(self, cfg, parts, malicious, w0, train_base):
        self.cfg = cfg
        params = hecore.preset(cfg.he_preset)
        clients, server = protocol.setup(
            params, cfg.num_clients,
            substream_seed(cfg.master_seed, "keys"),
            backend=cfg.he_backend, dp=cfg.dp,
        )
        for i, c in enumerate(clients):
            c.dataset = parts[i]
            c.prev_global = w0.copy()
            c.is_malicious = i in malicious
            c.attack = cfg.attack
            c.train_cfg = train_base
            c.clip_tau = cfg.clip_tau
            c.rescale_mode = cfg.ddfed_rescale
        self.clients = clients
        self.server = server
        self.decrypt_keys = clients[0].keys
        self.w0 = w0
        self.last_outcome = None
        self._deploy_factor = 1.0

    def global_model(self) -> ParamVector:
        """The model a participant deploys: the decrypted aggregate put back
        on the working scale by the same rule clients use."""
        if self.server.cached_global is None:
            return self.w0
        values = hecore.decrypt_vec(self.decrypt_keys,
                                    self.server.cached_global)
        return ParamVector(values * self._deploy_factor,
                           list(self.w0.layer_index))

    def run_round(self, t: int, sampled: List[int]) -> Set[int]:
        participants = [self.clients[cid] for cid in sampled]
        outcome = protocol.run_round(
            self.server, participants, t,
            master_seed=substream_seed(self.cfg.master_seed, "round"),
        )
        self.last_outcome = outcome
        if self.cfg.ddfed_rescale == "own_update_norm":
            self._deploy_factor = float(np.median(
                [c.prev_update_norm for c in participants
                 if not c.is_malicious and c.prev_update_norm]
            ))
        else:
            self._deploy_factor = float(self.cfg.ddfed_rescale)
        return {sampled[i] for i in outcome.selected}


# ---------------------------------------------------------------------------
# comparison grids
# ---------------------------------------------------------------------------

def compare_grid(base_cfg: ExperimentConfig, defenses: List[str],
                 attacks: List[str], out_dir: str,
                 resume: bool = False) -> dict:
    """One metrics file per (defense, attack) cell plus a manifest.

    Cell failures are recorded in the manifest; remaining cells proceed.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = []
    for defense in defenses:
        for attack in attacks:
            cfg = dataclasses.replace(
                base_cfg,
                defense=dataclasses.replace(base_cfg.defense, kind=defense),
                attack=dataclasses.replace(base_cfg.attack, kind=attack),
            )
            name = f"{defense}__{attack}.csv"
            path = os.path.join(out_dir, name)
            cell = {
                "defense": defense,
                "attack": attack,
                "metrics_path": name,
                "config": config_to_dict(cfg),
            }
            if resume and os.path.exists(path):
                cell["status"] = "skipped_existing"
                cells.append(cell)
                continue
            try:
                run_experiment(cfg, out_csv=path)
                cell["status"] = "ok"
            except Exception as e:  # record and continue with other cells
                cell["status"] = "error"
                cell["error"] = f"{type(e).__name__}: {e}"
            cells.append(cell)
    manifest = {
        "attack_start_round": base_cfg.attack.start_round,
        "cells": cells,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def preset_experiment(defense: str, attack: str, cold_start: bool = False,
                      master_seed: int = 0,
                      rounds: int = 30) -> ExperimentConfig:
    """Desk-scale defense-comparison cell: 10 clients, attacker ratio 0.3,
    label skew q=0.5, attack from round 10 (or 0 for cold start).

    Attack strengths are calibrated so the undefended baseline collapses
    while the defended runs stay near the clean baseline within the
    30-round budget.
    """
    start = 0 if cold_start else 10
    return ExperimentConfig(
        dataset=DatasetSpec(separation=5.0),
        defense=aggregators.AggregatorKind(kind=defense),
        attack=AttackSpec(kind=attack, start_round=start,
                          alie_z_override=12.0, scaling_gamma=50.0),
        rounds=rounds,
        master_seed=master_seed,
    )


def read_metrics_csv(path: str) -> List[dict]:
    """Parse a metrics CSV back into dicts (sets decoded, blanks -> None)."""
    out = []
    with open(path) as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            out.append({
                "round": int(rec["round"]),
                "test_accuracy": float(rec["test_accuracy"]),
                "test_loss": float(rec["test_loss"]),
                "wall_ms": float(rec["wall_ms"]),
                "selected": _ids(rec["selected"]),
                "sampled": _ids(rec["sampled"]),
                "true_malicious": _ids(rec["true_malicious"]),
                "precision": _opt(rec["precision"]),
                "recall": _opt(rec["recall"]),
            })
    return out


def _ids(s: str) -> Set[int]:
    return set() if not s else {int(x) for x in s.split(";")}


def _opt(s: str) -> Optional[float]:
    return None if s == "" else float(s)
