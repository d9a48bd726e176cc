"""Leveled homomorphic encryption over packed real vectors.

Two backends share one interface: a CKKS-style scheme implemented natively
(ckks_lite) and an exact plaintext mock for fast deterministic tests.
"""

from .api import (
    BACKENDS,
    CipherVector,
    KeySet,
    add,
    add_plain,
    decrypt_scalar,
    decrypt_vec,
    encrypt_vec,
    get_backend,
    inner_product,
    keygen,
    mul_plain,
    pack_scalars,
    weighted_sum,
)
from .params import (
    DEFAULT_ENCODE_RANGE,
    HeParams,
    desk_params,
    preset,
    secure_params,
)
from .serialize import (
    dump_cipher_vector,
    dump_public_keyset,
    export_secret_key,
    load_cipher_vector,
    load_public_keyset,
)

__all__ = [
    "BACKENDS",
    "CipherVector",
    "KeySet",
    "HeParams",
    "DEFAULT_ENCODE_RANGE",
    "add",
    "add_plain",
    "decrypt_scalar",
    "decrypt_vec",
    "desk_params",
    "dump_cipher_vector",
    "dump_public_keyset",
    "encrypt_vec",
    "export_secret_key",
    "get_backend",
    "inner_product",
    "keygen",
    "load_cipher_vector",
    "load_public_keyset",
    "mul_plain",
    "pack_scalars",
    "preset",
    "secure_params",
    "weighted_sum",
]
