"""Vector-level HE operations shared by both backends.

A CipherVector packs a real vector row-major into one or more ciphertexts
(slot_count slots each, zero-padded). All protocol code works through this
module and never touches backend internals, so swapping CKKS-lite for the
mock backend changes numerics only, never behavior.
"""

import hashlib
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from ..errors import (
    EncodeRangeError,
    MissingSecretKeyError,
    ParameterError,
    ShapeError,
    WeightError,
)
from .ckks import CkksBackend
from .mock import MockBackend
from .params import DEFAULT_ENCODE_RANGE, HeParams

BACKENDS = ("ckks_lite", "mock")

_backend_cache = {}


def get_backend(name: str, params: HeParams):
    key = (name, params)
    be = _backend_cache.get(key)
    if be is None:
        if name == "ckks_lite":
            be = CkksBackend(params)
        elif name == "mock":
            be = MockBackend(params)
        else:
            raise ParameterError(f"unknown backend {name!r}")
        _backend_cache[key] = be
    return be


@dataclass
class KeySet:
    """Key material for one party. Servers hold a copy without the secret."""

    backend: str
    params: HeParams
    key_id: str
    public: object
    eval_keys: object
    secret: object

    def public_part(self) -> "KeySet":
        return replace(self, secret=None)

    @property
    def has_secret(self) -> bool:
        return self.secret is not None


@dataclass
class CipherVector:
    """A real vector of length dim packed into ordered ciphertext chunks."""

    chunks: list
    dim: int

    @property
    def level(self) -> int:
        return min(c.level for c in self.chunks)

    @property
    def backend(self) -> str:
        return self.chunks[0].backend

    @property
    def key_id(self) -> str:
        return self.chunks[0].key_id


def keygen(params: HeParams, seed: int, backend: str = "ckks_lite") -> KeySet:
    """Generate a full key set (public, secret, evaluation keys).

    Deterministic in (params, seed, backend).
    """
    be = get_backend(backend, params)
    h = hashlib.sha256(
        f"{backend}|{params.ring_degree}|{params.modulus_chain}|"
        f"{params.scale_bits}|{seed}".encode()
    ).hexdigest()[:16]
    if backend == "mock":
        return KeySet(backend, params, h, public=h, eval_keys=h, secret=h)
    km = be.keygen(seed)
    public = (km.pk0, km.pk1)
    eval_keys = {"relin": km.relin, "rot": km.rot}
    return KeySet(backend, params, h, public=public, eval_keys=eval_keys,
                  secret=km)


def encrypt_vec(keys: KeySet, v, rng=None,
                encode_range: float = DEFAULT_ENCODE_RANGE) -> CipherVector:
    """Encrypt a real vector under the public key; chunked by slot count."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError("encrypt_vec expects a 1-d vector")
    if v.size == 0:
        raise ShapeError("cannot encrypt an empty vector")
    if np.max(np.abs(v)) > encode_range:
        raise EncodeRangeError(
            f"values exceed the encoder safe range {encode_range}"
        )
    if rng is None:
        rng = np.random.default_rng()
    be = get_backend(keys.backend, keys.params)
    slots = keys.params.slot_count
    chunks = []
    for start in range(0, v.size, slots):
        part = v[start:start + slots]
        chunks.append(
            be.encrypt(keys.public if keys.backend == "mock" else _km(keys),
                       part, keys.params.scale, rng, len(part), keys.key_id)
        )
    return CipherVector(chunks, v.size)


def _km(keys: KeySet):
    """CKKS key material for encryption: secret holder or public-only view."""
    if keys.secret is not None:
        return keys.secret
    return _PublicOnly(keys.public)


class _PublicOnly:
    def __init__(self, public):
        self.pk0, self.pk1 = public


def decrypt_vec(keys: KeySet, cv: CipherVector) -> np.ndarray:
    """Decrypt to a dim-length real vector. Requires the secret key."""
    if not keys.has_secret:
        raise MissingSecretKeyError("key set holds no secret key")
    be = get_backend(keys.backend, keys.params)
    parts = []
    for ct in cv.chunks:
        if keys.backend == "mock":
            be.check_key(ct, keys.key_id)
            parts.append(be.decrypt(None, ct))
        else:
            parts.append(be.decrypt(keys.secret, ct))
    out = np.concatenate(parts)
    if out.size != cv.dim:
        raise ShapeError("chunk slot lengths inconsistent with dim")
    return out


def decrypt_scalar(keys: KeySet, ct) -> float:
    """Decrypt slot 0 of a single ciphertext (inner-product results)."""
    cv = CipherVector([ct], 1)
    return float(decrypt_vec(keys, cv)[0])


def _check_same(a: CipherVector, b: CipherVector):
    if a.dim != b.dim:
        raise ShapeError(f"dim mismatch: {a.dim} vs {b.dim}")


def add(a: CipherVector, b: CipherVector) -> CipherVector:
    """Elementwise ciphertext addition."""
    _check_same(a, b)
    be = _be_of(a)
    return CipherVector(
        [be.add(x, y) for x, y in zip(a.chunks, b.chunks)], a.dim
    )


def add_plain(a: CipherVector, p) -> CipherVector:
    """Add a plaintext vector."""
    p = np.asarray(p, dtype=np.float64)
    if p.size != a.dim:
        raise ShapeError(f"dim mismatch: {a.dim} vs {p.size}")
    be = _be_of(a)
    slots = be.params.slot_count
    out = []
    for i, ct in enumerate(a.chunks):
        out.append(be.add_plain(ct, p[i * slots:(i + 1) * slots]))
    return CipherVector(out, a.dim)


def mul_plain(a: CipherVector, c: float) -> CipherVector:
    """Multiply by a plaintext scalar; consumes one level."""
    be = _be_of(a)
    return CipherVector(
        [be.mul_plain_scalar(ct, c) for ct in a.chunks], a.dim
    )


def inner_product(a: CipherVector, b: CipherVector, keys: KeySet):
    """Encrypted dot product; slot 0 (in fact every slot) of the result
    holds <a, b>.

    Elementwise ciphertext multiply, then log2(slot_count) rotate-and-add
    passes per chunk, then a cross-chunk add. Runs at the lowest level that
    still admits the multiply plus one downstream plaintext multiply, so
    callers can mask or scale the score afterwards.
    """
    _check_same(a, b)
    be = _be_of(a)
    ek = keys.eval_keys
    work = min(a.level, b.level, 2)
    acc_total = None
    slots = be.params.slot_count
    for ca, cb in zip(a.chunks, b.chunks):
        ca = be.drop_to_level(ca, work)
        cb = be.drop_to_level(cb, work)
        acc = be.mul_ct(ek, ca, cb)
        step = 1
        while step < slots:
            acc = be.add(acc, be.rotate(ek, acc, step))
            step *= 2
        acc_total = acc if acc_total is None else be.add(acc_total, acc)
    return replace(acc_total, slot_len=1)


def weighted_sum(cvs: List[CipherVector], w) -> CipherVector:
    """Plaintext-weighted ciphertext sum with weights summing to 1."""
    w = np.asarray(w, dtype=np.float64)
    if len(cvs) != w.size or len(cvs) == 0:
        raise ShapeError("need one weight per vector")
    if abs(w.sum() - 1.0) > 1e-9:
        raise WeightError(f"weights sum to {w.sum()!r}, expected 1")
    dim = cvs[0].dim
    for cv in cvs:
        if cv.dim != dim:
            raise ShapeError("all vectors must share a dimension")
    acc = None
    for cv, wi in zip(cvs, w):
        term = mul_plain(cv, float(wi))
        acc = term if acc is None else add(acc, term)
    return acc


def pack_scalars(cts: list, keys: KeySet) -> CipherVector:
    """Pack m scalar ciphertexts (value broadcast across slots, as produced
    by inner_product) into one ciphertext with value i in slot i.

    Each input is masked by the i-th basis vector (one plaintext multiply)
    and the masked terms are summed.
    """
    be = get_backend(keys.backend, keys.params)
    m = len(cts)
    if m > keys.params.slot_count:
        raise ShapeError("more scalars than slots")
    acc = None
    for i, ct in enumerate(cts):
        mask = np.zeros(m)
        mask[i] = 1.0
        term = be.mul_plain_vector(ct, mask)
        acc = term if acc is None else be.add(acc, term)
    acc = replace(acc, slot_len=m)
    return CipherVector([acc], m)


def _be_of(cv: CipherVector):
    # all chunks share backend and params by construction
    ct = cv.chunks[0]
    return get_backend(ct.backend, ct.params)
