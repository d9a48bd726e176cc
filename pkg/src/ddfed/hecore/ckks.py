"""Reduced CKKS-style leveled scheme over an RLWE negacyclic ring.

Ciphertexts are pairs of polynomials in evaluation (NTT) domain, stored as
uint64 RNS residue stacks of shape (active_primes, N). The modulus chain is
[base, rescale primes..., ks_prime]; a fresh ciphertext uses all primes
except the key-switching prime, and every rescale or plaintext/ciphertext
multiply drops one rescale prime. Key switching is hybrid: one digit per
active prime, lifted to the active modulus times the ks prime, then scaled
back down.

No bootstrapping, no security estimate: parameters are sized for protocol
fidelity at desk scale.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import EncodeRangeError, KeyError_, LevelError
from .encoding import encoder_for
from .modmath import (
    NttContext,
    add_mod,
    find_ntt_primes,
    mul_mod,
    neg_mod,
    residues_to_centered_float,
    sub_mod,
    to_residues,
)
from .params import HeParams

ERR_STD = 3.2  # discrete gaussian width for rlwe noise


@dataclass
class Ciphertext:
    """One packed ciphertext: payload c0, c1 in eval domain."""

    c0: np.ndarray
    c1: np.ndarray
    level: int
    scale: float
    slot_len: int
    key_id: str
    backend: str = "ckks_lite"
    params: Optional[HeParams] = None


class CkksContext:
    """Precomputed ring data shared by all keys of one parameter set."""

    def __init__(self, params: HeParams):
        self.params = params
        n = params.ring_degree
        self.n = n
        self.primes = find_ntt_primes(params.modulus_chain, 2 * n)
        self.ks_prime = self.primes[-1]
        self.chain = self.primes[:-1]  # levels 0..max_level
        self.ntt = NttContext(self.primes, n)
        self.encoder = encoder_for(n)
        self.max_level = params.max_level
        # automorphism slot/eval permutations per power-of-two rotation step
        self._rot_perm = {}
        self._rot_galois = {}
        step = 1
        while step < params.slot_count:
            g = self.encoder.rotation_exponent(step)
            self._rot_galois[step] = g
            self._rot_perm[step] = self._eval_permutation(g)
            step *= 2
        self._pinv = np.array(
            [pow(self.ks_prime % q, -1, q) for q in self.chain],
            dtype=np.uint64,
        ).reshape(-1, 1)

    def _eval_permutation(self, g: int):
        t = np.arange(self.n, dtype=np.int64)
        src = ((g * (2 * t + 1)) % (2 * self.n) - 1) // 2
        return src

    def rows(self, level: int):
        """Active prime indices for a ciphertext level (excludes ks prime)."""
        return list(range(level + 1))

    def q_at(self, level: int) -> int:
        return self.chain[level]

    # ---- sampling -------------------------------------------------------

    def _sample_ternary(self, rng) -> np.ndarray:
        return rng.integers(-1, 2, self.n).astype(np.int64)

    def _sample_err(self, rng) -> np.ndarray:
        return np.round(rng.normal(0.0, ERR_STD, self.n)).astype(np.int64)

    def _sample_uniform(self, rng, rows) -> np.ndarray:
        qs = [self.primes[i] for i in rows]
        out = np.empty((len(rows), self.n), dtype=np.uint64)
        for i, q in enumerate(qs):
            out[i] = rng.integers(0, q, self.n, dtype=np.uint64)
        return out

    def _ntt_small(self, coeffs: np.ndarray, rows) -> np.ndarray:
        primes = [self.primes[i] for i in rows]
        return self.ntt.forward(to_residues(coeffs, primes), rows=rows)


class CkksKeyMaterial:
    """Secret/public/evaluation keys bound to one context."""

    def __init__(self, ctx: CkksContext, seed: int):
        self.ctx = ctx
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        n = ctx.n
        all_rows = list(range(len(ctx.primes)))
        s_coef = ctx._sample_ternary(rng)
        self.s_eval = ctx._ntt_small(s_coef, all_rows)
        # public key over chain primes only (fresh encryption modulus)
        chain_rows = list(range(len(ctx.chain)))
        a = ctx._sample_uniform(rng, chain_rows)
        e = ctx._ntt_small(ctx._sample_err(rng), chain_rows)
        q = ctx.ntt.q[chain_rows]
        self.pk0 = add_mod(
            neg_mod(mul_mod(a, self.s_eval[chain_rows], q), q), e, q
        )
        self.pk1 = a
        # relinearization key for s^2 and rotation keys for power-of-two steps
        s2 = mul_mod(self.s_eval, self.s_eval, ctx.ntt.q)
        self.relin = self._make_ks_key(rng, s2)
        self.rot = {}
        for step, perm in ctx._rot_perm.items():
            s_rot = self.s_eval[:, perm]
            self.rot[step] = self._make_ks_key(rng, s_rot)

    def _make_ks_key(self, rng, target_s_eval):
        """Key switching key from target_s to s: one digit per chain prime.

        Returns (kb, ka) stacks of shape (num_digits, all_primes, N).
        """
        ctx = self.ctx
        all_rows = list(range(len(ctx.primes)))
        q_all = ctx.ntt.q
        p_mod = ctx.ks_prime
        kb, ka = [], []
        for j, qj in enumerate(ctx.chain):
            a = ctx._sample_uniform(rng, all_rows)
            e = ctx._ntt_small(ctx._sample_err(rng), all_rows)
            b = add_mod(
                neg_mod(mul_mod(a, self.s_eval, q_all), q_all), e, q_all
            )
            # add P * (crt unit for prime j) * target_s: nonzero only on row j
            factor = np.uint64(p_mod % qj)
            b[j] = add_mod(
                b[j],
                mul_mod(target_s_eval[j], factor, np.uint64(qj)),
                np.uint64(qj),
            )
            kb.append(b)
            ka.append(a)
        return np.stack(kb), np.stack(ka)


class CkksBackend:
    """Stateless operations over Ciphertext values for one parameter set."""

    name = "ckks_lite"

    def __init__(self, params: HeParams):
        self.ctx = CkksContext(params)
        self.params = params

    def _out(self, ct: Ciphertext) -> Ciphertext:
        ct.params = self.params
        ct.c0.flags.writeable = False
        ct.c1.flags.writeable = False
        return ct

    # ---- key plumbing ---------------------------------------------------

    def keygen(self, seed: int) -> CkksKeyMaterial:
        return CkksKeyMaterial(self.ctx, seed)

    # ---- encrypt / decrypt ----------------------------------------------

    def encrypt(self, keymat, values, scale: float, rng, slot_len: int,
                key_id: str) -> Ciphertext:
        ctx = self.ctx
        rows = ctx.rows(ctx.max_level)
        nr = len(rows)
        q = ctx.ntt.q[rows]
        coefs = np.stack([
            ctx.encoder.encode(values, scale).astype(np.int64),
            ctx._sample_ternary(rng),
            ctx._sample_err(rng),
            ctx._sample_err(rng),
        ])
        primes = np.array([ctx.primes[i] for i in rows], dtype=np.int64)
        lifted = np.mod(coefs[:, None, :], primes[None, :, None]).astype(
            np.uint64
        )
        tiled = np.tile(np.array(rows, dtype=np.int64), 4)
        m, u, e0, e1 = ctx.ntt.forward(
            lifted.reshape(4 * nr, ctx.n), rows=tiled
        ).reshape(4, nr, ctx.n)
        c0 = add_mod(add_mod(mul_mod(keymat.pk0, u, q), e0, q), m, q)
        c1 = add_mod(mul_mod(keymat.pk1, u, q), e1, q)
        return self._out(Ciphertext(c0, c1, ctx.max_level, scale, slot_len,
                          key_id))

    def decrypt(self, keymat, ct: Ciphertext) -> np.ndarray:
        ctx = self.ctx
        rows = ctx.rows(ct.level)
        q = ctx.ntt.q[rows]
        m_eval = add_mod(
            ct.c0, mul_mod(ct.c1, keymat.s_eval[rows], q), q
        )
        coeffs = residues_to_centered_float(
            ctx.ntt.inverse(m_eval, rows=rows),
            [ctx.primes[i] for i in rows],
        )
        return ctx.encoder.decode(coeffs, ct.scale, ct.slot_len)

    # ---- level / scale plumbing -----------------------------------------

    def drop_to_level(self, ct: Ciphertext, level: int) -> Ciphertext:
        if level > ct.level:
            raise LevelError("cannot raise ciphertext level")
        if level == ct.level:
            return ct
        k = level + 1
        return self._out(Ciphertext(ct.c0[:k], ct.c1[:k], level, ct.scale,
                          ct.slot_len, ct.key_id))

    def _align(self, a: Ciphertext, b: Ciphertext):
        lvl = min(a.level, b.level)
        a = self.drop_to_level(a, lvl)
        b = self.drop_to_level(b, lvl)
        if abs(a.scale - b.scale) > 1e-6 * a.scale:
            raise LevelError(
                f"scale mismatch: {a.scale:.6g} vs {b.scale:.6g}"
            )
        return a, b

    def rescale(self, ct: Ciphertext) -> Ciphertext:
        ctx = self.ctx
        if ct.level < 1:
            raise LevelError("level exhausted: cannot rescale at level 0")
        last = ct.level
        q_last = ctx.chain[last]
        c0 = self._div_by_prime(ct.c0, last)
        c1 = self._div_by_prime(ct.c1, last)
        return self._out(Ciphertext(c0, c1, last - 1, ct.scale / q_last,
                          ct.slot_len, ct.key_id))

    def _div_by_prime(self, poly, last: int):
        """Drop active prime row `last`, dividing the value by that prime."""
        ctx = self.ctx
        q_last = ctx.chain[last]
        new_rows = ctx.rows(last - 1)
        low_coef = ctx.ntt.inverse(poly[last:last + 1], rows=[last])[0]
        centered = low_coef.astype(np.int64)
        centered = np.where(centered > q_last // 2, centered - q_last,
                            centered)
        lifted = np.empty((len(new_rows), ctx.n), dtype=np.uint64)
        for i, row in enumerate(new_rows):
            lifted[i] = np.mod(centered, np.int64(ctx.primes[row])).astype(
                np.uint64
            )
        q = ctx.ntt.q[new_rows]
        diff = sub_mod(poly[:last], ctx.ntt.forward(lifted, rows=new_rows), q)
        inv = np.array(
            [pow(q_last % ctx.primes[i], -1, ctx.primes[i])
             for i in new_rows],
            dtype=np.uint64,
        ).reshape(-1, 1)
        return mul_mod(diff, inv, q)

    # ---- arithmetic -------------------------------------------------------

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_keys(a, b)
        a, b = self._align(a, b)
        q = self.ctx.ntt.q[self.ctx.rows(a.level)]
        return self._out(Ciphertext(
            add_mod(a.c0, b.c0, q), add_mod(a.c1, b.c1, q), a.level,
            a.scale, max(a.slot_len, b.slot_len), a.key_id
        ))

    def add_plain(self, ct: Ciphertext, values) -> Ciphertext:
        ctx = self.ctx
        rows = ctx.rows(ct.level)
        m = ctx._ntt_small(ctx.encoder.encode(values, ct.scale), rows)
        q = ctx.ntt.q[rows]
        return self._out(Ciphertext(add_mod(ct.c0, m, q), ct.c1, ct.level, ct.scale,
                          max(ct.slot_len, len(values)), ct.key_id))

    def mul_plain_scalar(self, ct: Ciphertext, c: float) -> Ciphertext:
        """Multiply every slot by scalar c; consumes one level."""
        ctx = self.ctx
        if ct.level < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        q_top = ctx.chain[ct.level]
        enc = round(float(c) * q_top)
        if abs(enc) >= 2 ** 52:
            raise EncodeRangeError(f"plaintext scalar {c} too large")
        rows = ctx.rows(ct.level)
        q = ctx.ntt.q[rows]
        const = np.array(
            [enc % ctx.primes[i] for i in rows], dtype=np.uint64
        ).reshape(-1, 1)
        prod0 = mul_mod(ct.c0, const, q)
        prod1 = mul_mod(ct.c1, const, q)
        tmp = Ciphertext(prod0, prod1, ct.level, ct.scale * q_top,
                         ct.slot_len, ct.key_id)
        return self.rescale(tmp)

    def mul_plain_vector(self, ct: Ciphertext, values) -> Ciphertext:
        """Elementwise multiply by a plaintext vector; consumes one level."""
        ctx = self.ctx
        if ct.level < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        q_top = ctx.chain[ct.level]
        rows = ctx.rows(ct.level)
        m = ctx._ntt_small(ctx.encoder.encode(values, float(q_top)), rows)
        q = ctx.ntt.q[rows]
        tmp = Ciphertext(
            mul_mod(ct.c0, m, q), mul_mod(ct.c1, m, q), ct.level,
            ct.scale * q_top, ct.slot_len, ct.key_id
        )
        return self.rescale(tmp)

    def mul_ct(self, eval_keys, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        """Ciphertext-ciphertext multiply with relinearization and rescale."""
        self._check_keys(a, b)
        a, b = self._align_for_mul(a, b)
        if a.level < 1:
            raise LevelError("level exhausted: cannot multiply at level 0")
        rows = self.ctx.rows(a.level)
        q = self.ctx.ntt.q[rows]
        t0 = mul_mod(a.c0, b.c0, q)
        t1 = add_mod(mul_mod(a.c0, b.c1, q), mul_mod(a.c1, b.c0, q), q)
        t2 = mul_mod(a.c1, b.c1, q)
        u0, u1 = self._key_switch(eval_keys["relin"], t2, a.level)
        prod = Ciphertext(
            add_mod(t0, u0, q), add_mod(t1, u1, q), a.level,
            a.scale * b.scale, max(a.slot_len, b.slot_len), a.key_id
        )
        return self.rescale(prod)

    def _align_for_mul(self, a, b):
        lvl = min(a.level, b.level)
        return self.drop_to_level(a, lvl), self.drop_to_level(b, lvl)

    def rotate(self, eval_keys, ct: Ciphertext, step: int) -> Ciphertext:
        """Rotate slots left by `step` (a power of two): out[j] = in[j+step]."""
        ctx = self.ctx
        rot = eval_keys["rot"]
        if step not in ctx._rot_perm or step not in rot:
            raise KeyError_(f"no rotation key for step {step}")
        perm = ctx._rot_perm[step]
        rows = ctx.rows(ct.level)
        q = ctx.ntt.q[rows]
        r0 = ct.c0[:, perm]
        r1 = ct.c1[:, perm]
        u0, u1 = self._key_switch(rot[step], r1, ct.level)
        return self._out(Ciphertext(add_mod(r0, u0, q), u1, ct.level, ct.scale,
                          ct.slot_len, ct.key_id))

    # ---- key switching ----------------------------------------------------

    def _key_switch(self, ks_key, d_eval, level: int):
        """Switch polynomial d (eval domain, rows 0..level) to the base key.

        Returns (u0, u1) over the active rows such that u0 + u1*s ~= d * s'.
        All per-digit transforms run as one batched NTT call.
        """
        ctx = self.ctx
        rows = ctx.rows(level)
        nd = len(rows)
        ext_rows = rows + [len(ctx.primes) - 1]  # active primes + ks prime
        ne = len(ext_rows)
        q_ext = ctx.ntt.q[ext_rows]
        d_coef = ctx.ntt.inverse(d_eval, rows=rows)
        primes_ext = np.array(
            [ctx.primes[i] for i in ext_rows], dtype=np.uint64
        )
        lifted = np.mod(d_coef[:, None, :], primes_ext[None, :, None])
        tiled = np.tile(np.array(ext_rows, dtype=np.int64), nd)
        digits = ctx.ntt.forward(
            lifted.reshape(nd * ne, ctx.n), rows=tiled
        ).reshape(nd, ne, ctx.n)
        kb, ka = ks_key
        # per-digit products stay below 2^49, so a plain sum over <=8 digits
        # fits in uint64 and one final reduction suffices
        acc0 = np.mod(
            mul_mod(digits, kb[:nd][:, ext_rows, :], q_ext[None]).sum(axis=0),
            q_ext,
        )
        acc1 = np.mod(
            mul_mod(digits, ka[:nd][:, ext_rows, :], q_ext[None]).sum(axis=0),
            q_ext,
        )
        return self._mod_down(acc0, rows), self._mod_down(acc1, rows)

    def _mod_down(self, acc, rows):
        """Divide an (active + ks prime) stack by the ks prime, rounding."""
        ctx = self.ctx
        p = ctx.ks_prime
        cp_coef = ctx.ntt.inverse(
            acc[-1:], rows=[len(ctx.primes) - 1]
        )[0]
        centered = cp_coef.astype(np.int64)
        centered = np.where(centered > p // 2, centered - p, centered)
        q = ctx.ntt.q[rows]
        lifted = np.empty((len(rows), ctx.n), dtype=np.uint64)
        for i, row in enumerate(rows):
            lifted[i] = np.mod(centered, np.int64(ctx.primes[row])).astype(
                np.uint64
            )
        lifted_eval = ctx.ntt.forward(lifted, rows=rows)
        diff = sub_mod(acc[:-1], lifted_eval, q)
        return mul_mod(diff, ctx._pinv[rows], q)

    # ---- misc -------------------------------------------------------------

    def _check_keys(self, a: Ciphertext, b: Ciphertext):
        if a.key_id != b.key_id:
            raise KeyError_("ciphertexts from different key sets")

    def fresh_scale(self) -> float:
        return self.params.scale
