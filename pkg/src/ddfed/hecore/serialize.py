"""Binary serialization for CipherVector and KeySet public parts.

Little-endian framing: header {magic "DDHE", version u16, backend u8,
ring_degree u32, chunk_count u32} followed by a backend-defined payload.
Secret keys are excluded everywhere except the explicitly named
export_secret_key.
"""

import io
import struct

import numpy as np

from ..errors import FormatError, MissingSecretKeyError
from .api import CipherVector, KeySet, get_backend
from .ckks import Ciphertext
from .mock import MockCiphertext
from .params import HeParams

MAGIC = b"DDHE"
VERSION = 1
_BACKEND_CODES = {"mock": 0, "ckks_lite": 1}
_BACKEND_NAMES = {v: k for k, v in _BACKEND_CODES.items()}
_HEADER = struct.Struct("<4sHBII")


def _write_bytes(buf, data: bytes):
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


def _read_bytes(buf) -> bytes:
    (n,) = struct.unpack("<I", _take(buf, 4))
    return _take(buf, n)


def _take(buf, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise FormatError("truncated stream")
    return data


def _write_array(buf, arr: np.ndarray):
    shape = np.asarray(arr.shape, dtype=np.uint32)
    buf.write(struct.pack("<BB", arr.ndim, 0))
    buf.write(shape.tobytes())
    _write_bytes(buf, np.ascontiguousarray(arr).tobytes())


def _read_array(buf, dtype) -> np.ndarray:
    ndim, _ = struct.unpack("<BB", _take(buf, 2))
    shape = np.frombuffer(_take(buf, 4 * ndim), dtype=np.uint32)
    data = np.frombuffer(_read_bytes(buf), dtype=dtype)
    return data.reshape(shape.astype(int)).copy()


def dump_cipher_vector(cv: CipherVector) -> bytes:
    buf = io.BytesIO()
    backend = cv.backend
    params = cv.chunks[0].params
    buf.write(_HEADER.pack(MAGIC, VERSION, _BACKEND_CODES[backend],
                           params.ring_degree, len(cv.chunks)))
    buf.write(struct.pack("<Q", cv.dim))
    for ct in cv.chunks:
        buf.write(struct.pack("<idI", ct.level, ct.scale, ct.slot_len))
        _write_bytes(buf, ct.key_id.encode())
        if backend == "mock":
            _write_array(buf, ct.values)
        else:
            _write_array(buf, ct.c0)
            _write_array(buf, ct.c1)
    return buf.getvalue()


def load_cipher_vector(data: bytes, params: HeParams) -> CipherVector:
    buf = io.BytesIO(data)
    magic, version, code, ring, nchunks = _HEADER.unpack(
        _take(buf, _HEADER.size)
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if code not in _BACKEND_NAMES:
        raise FormatError(f"unknown backend code {code}")
    if ring != params.ring_degree:
        raise FormatError(
            f"ring degree {ring} does not match params {params.ring_degree}"
        )
    backend = _BACKEND_NAMES[code]
    be = get_backend(backend, params)
    (dim,) = struct.unpack("<Q", _take(buf, 8))
    chunks = []
    for _ in range(nchunks):
        level, scale, slot_len = struct.unpack("<idI", _take(buf, 16))
        key_id = _read_bytes(buf).decode()
        if backend == "mock":
            values = _read_array(buf, np.float64)
            ct = MockCiphertext(values, level, scale, slot_len, key_id)
        else:
            c0 = _read_array(buf, np.uint64)
            c1 = _read_array(buf, np.uint64)
            ct = Ciphertext(c0, c1, level, scale, slot_len, key_id)
        chunks.append(be._out(ct))
    return CipherVector(chunks, dim)


def dump_public_keyset(keys: KeySet) -> bytes:
    """Serialize the public and evaluation keys. Never includes the secret."""
    buf = io.BytesIO()
    params = keys.params
    buf.write(_HEADER.pack(MAGIC, VERSION, _BACKEND_CODES[keys.backend],
                           params.ring_degree, 0))
    _write_bytes(buf, keys.key_id.encode())
    buf.write(struct.pack("<BI", len(params.modulus_chain),
                          params.scale_bits))
    buf.write(np.asarray(params.modulus_chain, dtype=np.uint8).tobytes())
    if keys.backend == "mock":
        return buf.getvalue()
    pk0, pk1 = keys.public
    _write_array(buf, pk0)
    _write_array(buf, pk1)
    relin = keys.eval_keys["relin"]
    _write_array(buf, relin[0])
    _write_array(buf, relin[1])
    rot = keys.eval_keys["rot"]
    buf.write(struct.pack("<I", len(rot)))
    for step in sorted(rot):
        kb, ka = rot[step]
        buf.write(struct.pack("<I", step))
        _write_array(buf, kb)
        _write_array(buf, ka)
    return buf.getvalue()


def load_public_keyset(data: bytes) -> KeySet:
    buf = io.BytesIO(data)
    magic, version, code, ring, _ = _HEADER.unpack(_take(buf, _HEADER.size))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    backend = _BACKEND_NAMES[code]
    key_id = _read_bytes(buf).decode()
    chain_len, scale_bits = struct.unpack("<BI", _take(buf, 5))
    chain = tuple(
        int(b) for b in np.frombuffer(_take(buf, chain_len), dtype=np.uint8)
    )
    params = HeParams(ring_degree=ring, modulus_chain=chain,
                      scale_bits=scale_bits)
    if backend == "mock":
        return KeySet(backend, params, key_id, public=key_id,
                      eval_keys=key_id, secret=None)
    pk0 = _read_array(buf, np.uint64)
    pk1 = _read_array(buf, np.uint64)
    relin = (_read_array(buf, np.uint64), _read_array(buf, np.uint64))
    (nrot,) = struct.unpack("<I", _take(buf, 4))
    rot = {}
    for _ in range(nrot):
        (step,) = struct.unpack("<I", _take(buf, 4))
        rot[step] = (_read_array(buf, np.uint64), _read_array(buf, np.uint64))
    return KeySet(backend, params, key_id, public=(pk0, pk1),
                  eval_keys={"relin": relin, "rot": rot}, secret=None)


def export_secret_key(keys: KeySet) -> bytes:
    """Explicit secret-key export. The only path that serializes a secret."""
    if not keys.has_secret:
        raise MissingSecretKeyError("key set holds no secret key")
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, _BACKEND_CODES[keys.backend],
                           keys.params.ring_degree, 0))
    _write_bytes(buf, keys.key_id.encode())
    if keys.backend == "mock":
        _write_bytes(buf, str(keys.secret).encode())
    else:
        _write_array(buf, keys.secret.s_eval)
    return buf.getvalue()
