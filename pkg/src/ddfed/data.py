"""Dataset loading (IDX binary format, synthetic blobs) and the label-skew
partitioner parameterized by q (q=0 ~ IID, q=1 pure per-class assignment)."""

import gzip
import struct
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DataError, FormatError, ParameterError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray  # (n, d), values in [0, 1]
    labels: np.ndarray    # (n,), ints in [0, C)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError("feature/label row counts differ")

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx])

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0


@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int = 10
    q: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_clients < 2:
            raise ParameterError("need at least 2 clients")
        if not 0.0 <= self.q <= 1.0:
            raise ParameterError("q must lie in [0, 1]")


def _open_maybe_gzip(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path) -> Dataset:
    """Parse big-endian IDX image/label files; pixels scaled to [0,1]."""
    with _open_maybe_gzip(images_path) as f:
        head = f.read(16)
        if len(head) != 16:
            raise FormatError("truncated image header")
        magic, count, rows, cols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise FormatError("truncated image payload")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with _open_maybe_gzip(labels_path) as f:
        head = f.read(8)
        if len(head) != 8:
            raise FormatError("truncated label header")
        magic, lcount = struct.unpack(">II", head)
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        raw = f.read(lcount)
        if len(raw) != lcount:
            raise FormatError("truncated label payload")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if count != lcount:
        raise FormatError(f"image count {count} != label count {lcount}")
    return Dataset(pixels.astype(np.float64) / 255.0, labels)


SYNTH_SIGMA = 0.1  # within-class noise per coordinate


def synth_dataset(n: int, classes: int, d: int, seed: int,
                  separation: float = 3.0) -> Dataset:
    """Gaussian blobs in [0,1]^d: each class raises its own block of
    coordinates by separation * sigma over the 0.2 background, so classes
    are linearly separable from 3 sigma up. Classes balanced within one
    sample."""
    if n < classes:
        raise ParameterError("need at least one sample per class")
    if d < classes:
        raise ParameterError("need at least one feature per class")
    rng = np.random.default_rng(seed)
    block = max(1, d // classes)
    amp = separation * SYNTH_SIGMA
    centers = np.full((classes, d), 0.2)
    for c in range(classes):
        centers[c, c * block:(c + 1) * block] += amp
    labels = np.arange(n) % classes
    feats = centers[labels] + rng.normal(0.0, SYNTH_SIGMA, size=(n, d))
    feats = np.clip(feats, 0.0, 1.0)
    order = rng.permutation(n)
    return Dataset(feats[order], labels[order])


def partition_noniid(data: Dataset, spec: PartitionSpec) -> List[Dataset]:
    """Label-skew split: clients are grouped round-robin by class; a sample
    of class c lands on a uniform client of group c with probability q,
    else on a uniform client overall. Disjoint and covering."""
    if len(data) == 0:
        raise DataError("cannot partition an empty dataset")
    m = spec.num_clients
    classes = data.num_classes
    rng = np.random.default_rng(spec.seed)
    groups = [[] for _ in range(classes)]
    for client in range(m):
        groups[client % classes].append(client)
    assignment = np.empty(len(data), dtype=np.int64)
    in_group = rng.random(len(data)) < spec.q
    uniform_pick = rng.integers(0, m, len(data))
    for i, label in enumerate(data.labels):
        group = groups[label % classes]
        if in_group[i] and group:
            assignment[i] = group[rng.integers(0, len(group))]
        else:
            assignment[i] = uniform_pick[i]
    return [data.subset(assignment == c) for c in range(m)]
