"""Model-poisoning payloads executed by corrupted clients, plus the
Byzantine feedback behavior (similarity-vote tampering).

Corrupted clients collude: they see each other's honest updates but never
those of benign clients. Before start_round every attack is inert and the
corrupted clients behave bit-identically to benign ones.
"""

from dataclasses import dataclass
from typing import List, Optional, Set

import numpy as np
from scipy.stats import norm

from .errors import AttackError, ParameterError, ShapeError
from .model import ParamVector

ATTACK_KINDS = ("none", "ipm", "alie", "scaling")
VOTE_MODES = ("honest", "invert", "promote_self")


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    start_round: int = 50
    ipm_eps: float = 0.5
    scaling_gamma: float = 10.0
    alie_z_override: Optional[float] = None
    vote_tamper: str = "honest"

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ParameterError(f"unknown attack kind {self.kind!r}")
        if self.vote_tamper not in VOTE_MODES:
            raise ParameterError(f"unknown vote mode {self.vote_tamper!r}")
        if self.start_round < 0:
            raise ParameterError("start_round must be >= 0")
        if self.ipm_eps <= 0:
            raise ParameterError("ipm_eps must be positive")
        if self.scaling_gamma <= 1:
            raise ParameterError("scaling_gamma must exceed 1")

    def active(self, round_index: int) -> bool:
        return self.kind != "none" and round_index >= self.start_round


@dataclass
class AdversaryView:
    """What colluding clients know: each other's honest updates."""

    colluders_updates: List[ParamVector]
    round: int


def ipm_update(view: AdversaryView, eps: float) -> ParamVector:
    """Negated scaled colluder mean; all corrupted clients submit it."""
    if not view.colluders_updates:
        raise AttackError("ipm needs at least one colluder update")
    stack = np.stack([p.values for p in view.colluders_updates])
    mean = stack.mean(axis=0)
    return ParamVector(-eps * mean,
                       list(view.colluders_updates[0].layer_index))


def alie_z(n_total: int, n_corrupt: int) -> float:
    """Deviation multiplier: Phi^-1(1 - (n - floor(n/2 + 1)) / (n - m)),
    clamped to [0, 3]."""
    s = n_total - (n_total // 2 + 1)
    z = float(norm.ppf(1.0 - s / (n_total - n_corrupt)))
    return float(np.clip(z, 0.0, 3.0))


def alie_update(view: AdversaryView, n_total: int, n_corrupt: int,
                z_override: Optional[float] = None) -> ParamVector:
    """Coordinate-wise mean minus z times std over the colluder updates."""
    if n_corrupt >= n_total / 2:
        raise AttackError("alie assumes a corrupted minority")
    if not view.colluders_updates:
        raise AttackError("alie needs colluder updates")
    stack = np.stack([p.values for p in view.colluders_updates])
    mu = stack.mean(axis=0)
    sigma = stack.std(axis=0) if len(view.colluders_updates) >= 2 else 0.0
    z = z_override if z_override is not None else alie_z(n_total, n_corrupt)
    return ParamVector(mu - z * sigma,
                       list(view.colluders_updates[0].layer_index))


def scaling_update(honest: ParamVector, prev_global: ParamVector,
                   gamma: float) -> ParamVector:
    """Amplify the round delta: prev + gamma * (honest - prev)."""
    if honest.values.shape != prev_global.values.shape:
        raise ShapeError("parameter shapes differ")
    return ParamVector(
        prev_global.values + gamma * (honest.values - prev_global.values),
        list(honest.layer_index),
    )


def honest_selection(scores) -> Set[int]:
    """Mean-threshold rule shared with the protocol: {j : s_j >= mean}."""
    scores = np.asarray(scores, dtype=np.float64)
    mean = scores.mean()
    return {int(j) for j in np.nonzero(scores >= mean)[0]}


def tamper_vote(true_scores, self_ids: Set[int], malicious_ids: Set[int],
                mode: str) -> Set[int]:
    """Selection a corrupted client reports for the given decrypted scores."""
    base = honest_selection(true_scores)
    everyone = set(range(len(true_scores)))
    if mode == "honest":
        return base
    if mode == "invert":
        return everyone - base
    if mode == "promote_self":
        return base | (malicious_ids & everyone)
    raise ParameterError(f"unknown vote mode {mode!r}")
