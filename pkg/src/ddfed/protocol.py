"""Client and server state machines for the dual-defense round.

One training round, in order: clients decrypt the previous global, clip,
train, normalize and encrypt (full vector and last layer); the server
perturbs the encrypted last layers and scores each against its cached
encrypted global last layer via packed inner products; clients decrypt the
broadcast scores and each votes a trusted set by mean threshold; the server
majority-votes the final set, forms data-size fusion weights, and aggregates
the encrypted full updates. The server never holds a secret key.
"""

import io
import math
import struct
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Set

import numpy as np

from . import hecore
from .attacks import (
    AdversaryView,
    AttackSpec,
    alie_update,
    honest_selection,
    ipm_update,
    scaling_update,
    tamper_vote,
)
from .data import Dataset
from .errors import FormatError, ParameterError, ProtocolError
from .hecore import CipherVector, KeySet
from .model import (
    ParamVector,
    TrainConfig,
    clip_global,
    l2_normalize,
    last_layer,
    train_local,
)
from .rng import substream, substream_seed


@dataclass(frozen=True)
class DpConfig:
    epsilon: float = 0.01
    delta: float = 1e-5
    delta_f: float = 0.001
    per_client_noise: bool = False
    enabled: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")
        if self.delta_f <= 0:
            raise ParameterError("delta_f must be positive")


def gaussian_sigma(eps: float, delta: float, delta_f: float) -> float:
    """Gaussian-mechanism noise width: delta_f * sqrt(2 ln(1.25/delta)) / eps."""
    return delta_f * math.sqrt(2.0 * math.log(1.25 / delta)) / eps


@dataclass
class ClientState:
    id: int
    dataset: Optional[Dataset]
    keys: KeySet
    prev_global: Optional[ParamVector]
    is_malicious: bool = False
    attack: AttackSpec = field(default_factory=AttackSpec)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    clip_tau: float = 1.0
    # post-decrypt rescale hook: a fixed factor, or "own_update_norm" to
    # rescale the unit-norm aggregate by this client's previous update norm
    rescale_mode: object = 1.0
    prev_global_last: Optional[np.ndarray] = None
    prev_update_norm: Optional[float] = None
    last_seen_global: Optional[ParamVector] = None
    inv_norm_report: float = 1.0


@dataclass
class ServerState:
    """Aggregation-server state. Holds public and evaluation keys only."""

    public_keys: KeySet
    dp: DpConfig = field(default_factory=DpConfig)
    round: int = 0
    cached_global: Optional[CipherVector] = None
    cached_global_last: Optional[CipherVector] = None

    def __post_init__(self):
        if self.public_keys.has_secret:
            raise ProtocolError("server state must not hold a secret key")


@dataclass
class ClientRoundMsg:
    enc_update: CipherVector
    enc_last: CipherVector
    inv_global_norm: float
    data_size: int


@dataclass
class SelectionVote:
    voter_id: int
    selected: Set[int]


@dataclass
class RoundOutcome:
    enc_global: CipherVector
    enc_global_last: CipherVector
    selected: Set[int]
    votes: Optional[List[SelectionVote]]
    scores: Optional[np.ndarray]
    weights: np.ndarray
    timings_ms: dict
    empty_vote_fallback: bool = False


def setup(params: hecore.HeParams, m: int, seed: int,
          backend: str = "ckks_lite", dp: Optional[DpConfig] = None):
    """Trusted-dealer key setup: every client gets the full key set, the
    server only the public and evaluation keys."""
    if m < 2:
        raise ParameterError("need at least 2 clients")
    keys = hecore.keygen(params, seed, backend)
    clients = [
        ClientState(id=i, dataset=None, keys=keys, prev_global=None)
        for i in range(m)
    ]
    server = ServerState(public_keys=keys.public_part(),
                         dp=dp or DpConfig())
    return clients, server


# ---------------------------------------------------------------------------
# client side
# ---------------------------------------------------------------------------

def _rescale_hook(c: ClientState, w: ParamVector) -> ParamVector:
    if c.rescale_mode == "own_update_norm":
        factor = c.prev_update_norm
        if factor is None:
            factor = float(np.linalg.norm(c.prev_global.values))
    else:
        factor = float(c.rescale_mode)
    if factor == 1.0:
        return w
    return ParamVector(w.values * factor, list(w.layer_index))


def client_train_update(c: ClientState, enc_global: Optional[CipherVector],
                        enc_global_last: Optional[CipherVector],
                        round_index: int) -> ParamVector:
    """Decrypt, clip, train; returns the honest update and refreshes the
    client's view of the global model."""
    if c.dataset is None or len(c.dataset) == 0:
        raise ProtocolError(f"client {c.id} has no data")
    if enc_global is not None:
        w_in = ParamVector(hecore.decrypt_vec(c.keys, enc_global),
                           list(c.prev_global.layer_index))
        c.last_seen_global = w_in
        g_last = hecore.decrypt_vec(c.keys, enc_global_last)
        c.prev_global_last = g_last
        c.inv_norm_report = 1.0 / float(np.linalg.norm(g_last))
        eff = clip_global(c.prev_global, _rescale_hook(c, w_in), c.clip_tau)
        c.prev_global = eff
    else:
        # first round: train from the dealer-distributed initial model
        c.last_seen_global = c.prev_global
        c.inv_norm_report = 1.0 / float(
            np.linalg.norm(last_layer(c.prev_global))
        )
        eff = c.prev_global
    cfg = replace(
        c.train_cfg,
        seed=substream_seed(c.train_cfg.seed, "train", c.id, round_index),
    )
    honest = train_local(eff, c.dataset, cfg)
    c.prev_update_norm = float(np.linalg.norm(honest.values))
    return honest


def client_finalize_msg(c: ClientState, payload: ParamVector,
                        round_index: int, master_seed: int) -> ClientRoundMsg:
    """Normalize the (possibly attacked) payload and encrypt both views."""
    rng = substream(master_seed, "enc", c.id, round_index)
    full = l2_normalize(payload.values)
    last = l2_normalize(last_layer(payload))
    return ClientRoundMsg(
        enc_update=hecore.encrypt_vec(c.keys, full, rng),
        enc_last=hecore.encrypt_vec(c.keys, last, rng),
        inv_global_norm=c.inv_norm_report,
        data_size=len(c.dataset),
    )


def client_produce_update(c: ClientState, enc_global, enc_global_last,
                          round_index: int, master_seed: int,
                          view: Optional[AdversaryView] = None,
                          n_round: Optional[int] = None,
                          n_corrupt: Optional[int] = None) -> ClientRoundMsg:
    """Full benign or malicious message pipeline for one client."""
    honest = client_train_update(c, enc_global, enc_global_last, round_index)
    payload = honest
    if c.is_malicious and c.attack.active(round_index):
        if view is None:
            view = AdversaryView([honest], round_index)
        payload = attack_payload(c, honest, view, n_round or 1,
                                 n_corrupt or 1)
    return client_finalize_msg(c, payload, round_index, master_seed)


def attack_payload(c: ClientState, honest: ParamVector, view: AdversaryView,
                   n_round: int, n_corrupt: int) -> ParamVector:
    kind = c.attack.kind
    if kind == "ipm":
        return ipm_update(view, c.attack.ipm_eps)
    if kind == "alie":
        return alie_update(view, n_round, n_corrupt, c.attack.alie_z_override)
    if kind == "scaling":
        return scaling_update(honest, c.last_seen_global,
                              c.attack.scaling_gamma)
    return honest


def client_select(c: ClientState, enc_scores: CipherVector,
                  round_index: int,
                  round_malicious: Set[int] = frozenset(),
                  self_index: Optional[int] = None) -> SelectionVote:
    """Decrypt the broadcast scores and vote a trusted set."""
    scores = hecore.decrypt_vec(c.keys, enc_scores)
    tampering = (
        c.is_malicious
        and c.attack.vote_tamper != "honest"
        and round_index >= c.attack.start_round
    )
    if tampering:
        selected = tamper_vote(scores, {self_index}, set(round_malicious),
                               c.attack.vote_tamper)
    else:
        selected = honest_selection(scores)
    return SelectionVote(voter_id=c.id, selected=selected)


# ---------------------------------------------------------------------------
# server side
# ---------------------------------------------------------------------------

def server_score(server: ServerState, msgs: List[ClientRoundMsg],
                 rng) -> CipherVector:
    """Perturbed encrypted similarity of each client's last layer against
    the cached global last layer, packed into one broadcast vector."""
    if not msgs:
        raise ProtocolError("no client messages to score")
    if server.cached_global_last is None:
        raise ProtocolError("no cached global last layer (bootstrap round)")
    median_inv = float(np.median([m.inv_global_norm for m in msgs]))
    g = hecore.mul_plain(server.cached_global_last, median_inv)
    dim = msgs[0].enc_last.dim
    noise = None
    if server.dp.enabled:
        sigma = gaussian_sigma(server.dp.epsilon, server.dp.delta,
                               server.dp.delta_f)
        if not server.dp.per_client_noise:
            noise = rng.normal(0.0, sigma, dim)
    score_cts = []
    for msg in msgs:
        x = msg.enc_last
        if server.dp.enabled:
            delta = (rng.normal(0.0, sigma, dim)
                     if server.dp.per_client_noise else noise)
            x = hecore.add_plain(x, delta)
        score_cts.append(hecore.inner_product(x, g, server.public_keys))
    return hecore.pack_scalars(score_cts, server.public_keys)


def majority_vote(votes: List[SelectionVote], n_round: int) -> Set[int]:
    """Clients appearing in strictly more than half of the votes."""
    if not votes:
        raise ProtocolError("no votes submitted")
    counts = np.zeros(n_round)
    for vote in votes:
        for j in vote.selected:
            if 0 <= j < n_round:
                counts[j] += 1
    threshold = len(votes) / 2.0
    return {int(j) for j in np.nonzero(counts > threshold)[0]}


def fusion_weights(selected: Set[int], sizes: List[int]) -> np.ndarray:
    """Data-size proportional weights over the selected set, zero elsewhere."""
    if not selected:
        raise ProtocolError("empty selection has no fusion weights")
    sizes = np.asarray(sizes, dtype=np.float64)
    w = np.zeros(sizes.size)
    idx = sorted(selected)
    total = sizes[idx].sum()
    w[idx] = sizes[idx] / total
    return w


def server_aggregate(server: ServerState, msgs: List[ClientRoundMsg],
                     weights) -> CipherVector:
    """Weighted ciphertext fusion; refreshes both cached aggregates."""
    enc_global = hecore.weighted_sum([m.enc_update for m in msgs], weights)
    enc_last = hecore.weighted_sum([m.enc_last for m in msgs], weights)
    server.cached_global = enc_global
    server.cached_global_last = enc_last
    return enc_global


# ---------------------------------------------------------------------------
# one full round
# ---------------------------------------------------------------------------

def run_round(server: ServerState, clients: List[ClientState],
              round_index: int, master_seed: int) -> RoundOutcome:
    """Execute one full round over the given participants.

    Deterministic in (states, round_index, master_seed). The outcome's
    selected/voted sets use within-round indices 0..n-1.
    """
    n = len(clients)
    if n < 1:
        raise ProtocolError("round needs at least one participant")
    timings = {}
    t0 = time.perf_counter()

    malicious_local = {i for i, c in enumerate(clients) if c.is_malicious}
    active_attack = any(
        clients[i].attack.active(round_index) for i in malicious_local
    ) if malicious_local else False

    honest = []
    for c in clients:
        honest.append(
            client_train_update(c, server.cached_global,
                                server.cached_global_last, round_index)
        )
    timings["train_ms"] = _ms_since(t0)

    t1 = time.perf_counter()
    payloads = list(honest)
    if active_attack:
        view = AdversaryView(
            [honest[i] for i in sorted(malicious_local)], round_index
        )
        for i in sorted(malicious_local):
            c = clients[i]
            if c.attack.active(round_index):
                payloads[i] = attack_payload(c, honest[i], view, n,
                                             len(malicious_local))
    msgs = [
        client_finalize_msg(c, payloads[i], round_index, master_seed)
        for i, c in enumerate(clients)
    ]
    timings["encrypt_ms"] = _ms_since(t1)

    t2 = time.perf_counter()
    votes = None
    scores = None
    fallback = False
    if server.cached_global_last is None:
        selected = set(range(n))  # bootstrap round: no reference to score by
    else:
        noise_rng = substream(master_seed, "dp_noise", round_index)
        enc_scores = server_score(server, msgs, noise_rng)
        timings["score_ms"] = _ms_since(t2)
        t3 = time.perf_counter()
        votes = [
            client_select(c, enc_scores, round_index, malicious_local, i)
            for i, c in enumerate(clients)
        ]
        scores = hecore.decrypt_vec(clients[0].keys, enc_scores)
        selected = majority_vote(votes, n)
        if not selected:
            selected = set(range(n))
            fallback = True
        timings["select_ms"] = _ms_since(t3)

    t4 = time.perf_counter()
    weights = fusion_weights(selected, [m.data_size for m in msgs])
    enc_global = server_aggregate(server, msgs, weights)
    timings["aggregate_ms"] = _ms_since(t4)
    timings["total_ms"] = _ms_since(t0)
    server.round = round_index + 1

    return RoundOutcome(
        enc_global=enc_global,
        enc_global_last=server.cached_global_last,
        selected=selected,
        votes=votes,
        scores=scores,
        weights=weights,
        timings_ms=timings,
        empty_vote_fallback=fallback,
    )


def _ms_since(t: float) -> float:
    return (time.perf_counter() - t) * 1000.0


# ---------------------------------------------------------------------------
# wire format
# ---------------------------------------------------------------------------

_MSG_HEADER = struct.Struct("<IIQd")


def dump_round_msg(msg: ClientRoundMsg, round_index: int,
                   client_id: int) -> bytes:
    buf = io.BytesIO()
    buf.write(_MSG_HEADER.pack(round_index, client_id, msg.data_size,
                               msg.inv_global_norm))
    for cv in (msg.enc_update, msg.enc_last):
        blob = hecore.dump_cipher_vector(cv)
        buf.write(struct.pack("<Q", len(blob)))
        buf.write(blob)
    return buf.getvalue()


def load_round_msg(data: bytes, params: hecore.HeParams):
    buf = io.BytesIO(data)
    head = buf.read(_MSG_HEADER.size)
    if len(head) != _MSG_HEADER.size:
        raise FormatError("truncated round message")
    round_index, client_id, data_size, inv_norm = _MSG_HEADER.unpack(head)
    cvs = []
    for _ in range(2):
        raw = buf.read(8)
        if len(raw) != 8:
            raise FormatError("truncated round message")
        (ln,) = struct.unpack("<Q", raw)
        cvs.append(hecore.load_cipher_vector(buf.read(ln), params))
    msg = ClientRoundMsg(enc_update=cvs[0], enc_last=cvs[1],
                         inv_global_norm=inv_norm, data_size=data_size)
    return msg, round_index, client_id
