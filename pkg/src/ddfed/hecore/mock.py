"""Plaintext mock backend behind the same sealed interface as CKKS-lite.

Payloads hold exact slot values; level and scale bookkeeping mirrors the
real backend step for step, so any op sequence that exhausts the modulus
chain raises the same LevelError on both backends. Decryption checks the
key id, which real CKKS cannot do (documented caveat of the real backend).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import KeyMismatchError, LevelError, EncodeRangeError
from .modmath import find_ntt_primes
from .params import HeParams


@dataclass
class MockCiphertext:
    values: np.ndarray  # padded to slot_count
    level: int
    scale: float
    slot_len: int
    key_id: str
    backend: str = "mock"
    params: object = None


class MockBackend:
    name = "mock"

    def __init__(self, params: HeParams):
        self.params = params
        # the real chain primes drive scale bookkeeping so both backends
        # accept and reject exactly the same op sequences
        self.chain = find_ntt_primes(
            params.modulus_chain, 2 * params.ring_degree
        )[:-1]
        self.max_level = params.max_level

    def _out(self, ct: MockCiphertext) -> MockCiphertext:
        ct.params = self.params
        ct.values = np.asarray(ct.values, dtype=np.float64)
        ct.values.flags.writeable = False
        return ct

    # ---- key plumbing -----------------------------------------------------

    def keygen(self, seed: int):
        return None  # no material beyond the key id

    # ---- encrypt / decrypt --------------------------------------------------

    def encrypt(self, keymat, values, scale, rng, slot_len, key_id):
        slots = self.params.slot_count
        padded = np.zeros(slots)
        padded[: len(values)] = values
        return self._out(MockCiphertext(padded, self.max_level, scale, slot_len,
                              key_id))

    def decrypt(self, keymat, ct: MockCiphertext):
        return ct.values[: ct.slot_len].copy()

    def check_key(self, ct, key_id: str):
        if ct.key_id != key_id:
            raise KeyMismatchError(
                f"ciphertext under key {ct.key_id}, decrypting with {key_id}"
            )

    # ---- level / scale plumbing ---------------------------------------------

    def drop_to_level(self, ct, level):
        if level > ct.level:
            raise LevelError("cannot raise ciphertext level")
        if level == ct.level:
            return ct
        return self._out(MockCiphertext(ct.values, level, ct.scale, ct.slot_len,
                              ct.key_id))

    def _align(self, a, b):
        lvl = min(a.level, b.level)
        a, b = self.drop_to_level(a, lvl), self.drop_to_level(b, lvl)
        if abs(a.scale - b.scale) > 1e-6 * a.scale:
            raise LevelError(
                f"scale mismatch: {a.scale:.6g} vs {b.scale:.6g}"
            )
        return a, b

    # ---- arithmetic -----------------------------------------------------------

    def add(self, a, b):
        if a.key_id != b.key_id:
            raise KeyMismatchError("ciphertexts from different key sets")
        a, b = self._align(a, b)
        return self._out(MockCiphertext(a.values + b.values, a.level, a.scale,
                              max(a.slot_len, b.slot_len), a.key_id))

    def add_plain(self, ct, values):
        padded = np.zeros(self.params.slot_count)
        padded[: len(values)] = values
        return self._out(MockCiphertext(ct.values + padded, ct.level, ct.scale,
                              max(ct.slot_len, len(values)),
                              ct.key_id))

    def mul_plain_scalar(self, ct, c):
        if ct.level < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        if abs(float(c)) * self.chain[ct.level] >= 2 ** 52:
            raise EncodeRangeError(f"plaintext scalar {c} too large")
        return self._out(MockCiphertext(ct.values * float(c), ct.level - 1, ct.scale,
                              ct.slot_len, ct.key_id))

    def mul_plain_vector(self, ct, values):
        if ct.level < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        padded = np.zeros(self.params.slot_count)
        padded[: len(values)] = values
        return self._out(MockCiphertext(ct.values * padded, ct.level - 1, ct.scale,
                              ct.slot_len, ct.key_id))

    def mul_ct(self, keymat, a, b):
        if a.key_id != b.key_id:
            raise KeyMismatchError("ciphertexts from different key sets")
        lvl = min(a.level, b.level)
        a, b = self.drop_to_level(a, lvl), self.drop_to_level(b, lvl)
        if lvl < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        scale = a.scale * b.scale / self.chain[lvl]
        return self._out(MockCiphertext(a.values * b.values, lvl - 1, scale,
                              max(a.slot_len, b.slot_len), a.key_id))

    def rotate(self, keymat, ct, step):
        return self._out(MockCiphertext(np.roll(ct.values, -step), ct.level, ct.scale,
                              ct.slot_len, ct.key_id))
