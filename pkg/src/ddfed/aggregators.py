"""Plaintext fusion and robust-aggregation baselines: FedAvg, Krum,
coordinate Median, Trimmed Mean, Clipping Median, and the cosine defense
(the exact plaintext analog of the encrypted detection path)."""

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .errors import NormalizationError, ParameterError, ShapeError
from .model import ParamVector, last_layer

AGGREGATOR_KINDS = (
    "fedavg", "krum", "median", "trimmed_mean", "clipping_median",
    "cos_defense", "ddfed",
)


@dataclass(frozen=True)
class AggregatorKind:
    kind: str = "fedavg"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ParameterError(f"unknown aggregator {self.kind!r}")
        beta = self.params.get("beta")
        if beta is not None and not 0 <= beta < 0.5:
            raise ParameterError("beta must lie in [0, 0.5)")


def _stack(updates: List[ParamVector]) -> np.ndarray:
    if not updates:
        raise ShapeError("no updates to aggregate")
    dim = updates[0].values.size
    for u in updates:
        if u.values.size != dim:
            raise ShapeError("update dimensions differ")
    return np.stack([u.values for u in updates])


def _wrap(values: np.ndarray, like: ParamVector) -> ParamVector:
    return ParamVector(values, list(like.layer_index))


def fedavg(updates: List[ParamVector], sizes: List[int]) -> ParamVector:
    """Data-size weighted mean."""
    stack = _stack(updates)
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size != len(updates) or np.any(sizes <= 0):
        raise ShapeError("need one positive size per update")
    w = sizes / sizes.sum()
    return _wrap(w @ stack, updates[0])


def krum(updates: List[ParamVector], f: int) -> ParamVector:
    """The update with the smallest summed squared distance to its
    n - f - 2 nearest neighbors; ties break to the lowest index."""
    n = len(updates)
    if n < f + 3:
        raise ParameterError(f"krum needs n >= f + 3, got n={n}, f={f}")
    stack = _stack(updates)
    sq = ((stack[:, None, :] - stack[None, :, :]) ** 2).sum(axis=2)
    k = n - f - 2
    scores = np.empty(n)
    for i in range(n):
        others = np.delete(sq[i], i)
        scores[i] = np.sort(others)[:k].sum()
    return updates[int(np.argmin(scores))].copy()


def coord_median(updates: List[ParamVector]) -> ParamVector:
    """Coordinate-wise median (even counts average the central pair)."""
    stack = _stack(updates)
    return _wrap(np.median(stack, axis=0), updates[0])


def trimmed_mean(updates: List[ParamVector], beta: float) -> ParamVector:
    """Coordinate-wise mean after trimming the floor(beta*n) extremes."""
    n = len(updates)
    t = int(np.floor(beta * n))
    if 2 * t >= n:
        raise ParameterError("trim fraction removes every value")
    stack = np.sort(_stack(updates), axis=0)
    kept = stack[t:n - t] if t else stack
    return _wrap(kept.mean(axis=0), updates[0])


def clipping_median(updates: List[ParamVector]) -> ParamVector:
    """L2-clip each update to the median norm, then coordinate median."""
    stack = _stack(updates)
    norms = np.linalg.norm(stack, axis=1)
    bound = float(np.median(norms))
    factors = np.minimum(1.0, np.divide(
        bound, norms, out=np.ones_like(norms), where=norms > 0
    ))
    return _wrap(np.median(stack * factors[:, None], axis=0), updates[0])


def cosine_scores(updates: List[ParamVector],
                  prev_global_last_layer: np.ndarray) -> np.ndarray:
    """Cosine of each update's last layer against the previous global's."""
    g = np.asarray(prev_global_last_layer, dtype=np.float64)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0:
        raise NormalizationError("previous global last layer has zero norm")
    out = np.empty(len(updates))
    for i, u in enumerate(updates):
        li = last_layer(u)
        lnorm = float(np.linalg.norm(li))
        if lnorm == 0:
            raise NormalizationError(f"update {i} has a zero last layer")
        out[i] = float(li @ g) / (lnorm * gnorm)
    return out


def cos_defense(updates: List[ParamVector], prev_global_last_layer,
                sizes: List[int]) -> ParamVector:
    """Keep clients whose cosine score reaches the mean; FedAvg the rest.

    This is the plaintext analog of the encrypted detection path with zero
    noise: same scores, same inclusive mean threshold, same fusion weights.
    """
    scores = cosine_scores(updates, prev_global_last_layer)
    selected = scores >= scores.mean()
    kept = [u for u, s in zip(updates, selected) if s]
    kept_sizes = [s for s, sel in zip(sizes, selected) if sel]
    return fedavg(kept, kept_sizes)
