"""Vectorized modular arithmetic and negacyclic NTT over RNS residue stacks.

Polynomials live in Z_q[X]/(X^N + 1) for a set of NTT-friendly primes q
(q ≡ 1 mod 2N). A polynomial is stored as a uint64 array of shape
(num_primes, N) holding its residues per prime. All primes are kept below
2^49 so that products can be reduced with a float64 Barrett-style trick
without 128-bit arithmetic.
"""

import numpy as np

from ..errors import ParameterError

try:
    from . import _kernels

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _kernels = None
    HAVE_NUMBA = False

# Primes above this bound would break the float64 quotient estimate.
MAX_PRIME_BITS = 49

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def find_ntt_primes(bit_sizes, two_n: int):
    """Find distinct primes p ≡ 1 (mod two_n) with the requested bit sizes.

    Searches downward from 2^bits so each prime is the largest of its size
    supporting a negacyclic NTT of length two_n / 2.
    """
    found = []
    for bits in bit_sizes:
        if not 20 <= bits <= MAX_PRIME_BITS:
            raise ParameterError(
                f"prime size {bits} bits outside supported range "
                f"[20, {MAX_PRIME_BITS}]"
            )
        p = ((1 << bits) // two_n) * two_n + 1
        while p >= (1 << (bits - 1)):
            if p not in found and _is_prime(p):
                found.append(p)
                break
            p -= two_n
        else:
            raise ParameterError(f"no {bits}-bit NTT prime for 2N={two_n}")
    return found


def primitive_2n_root(p: int, two_n: int) -> int:
    """A primitive two_n-th root of unity mod p (two_n must be a power of 2)."""
    order = p - 1
    if order % two_n:
        raise ParameterError(f"{p} does not support NTT of length {two_n}")
    x = 2
    while True:
        psi = pow(x, order // two_n, p)
        # order divides the power of two two_n; primitive iff psi^(two_n/2) = -1
        if pow(psi, two_n // 2, p) == p - 1:
            return psi
        x += 1


def mul_mod(a, b, q):
    """Elementwise (a * b) mod q for uint64 arrays, q < 2^49.

    Uses a float64 estimate of the quotient (via reciprocal multiply); the
    wrapped 64-bit remainder is then corrected into [0, q). The estimate is
    off by at most one, and both corrections are branchless: adding or
    subtracting q wraps out-of-range values back under q, so `minimum`
    selects the true remainder. Broadcasting follows numpy rules, so q may
    be a column vector of per-row moduli.
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    qu = np.asarray(q, dtype=np.uint64)
    qinv = 1.0 / np.asarray(q, dtype=np.float64)
    quot = (a.astype(np.float64) * b.astype(np.float64) * qinv).astype(
        np.uint64
    )
    with np.errstate(over="ignore"):
        r = a * b - quot * qu
        r = np.minimum(r, r + qu)
        r = np.minimum(r, r - qu)
    return r


def add_mod(a, b, q):
    r = a + b
    return np.where(r >= q, r - q, r)


def sub_mod(a, b, q):
    return np.where(a >= b, a - b, a + np.asarray(q, dtype=np.uint64) - b)


def neg_mod(a, q):
    return np.where(a == 0, a, np.asarray(q, dtype=np.uint64) - a)


def _power_table(base: int, count: int, p: int):
    out = np.empty(count, dtype=np.uint64)
    cur = 1
    for i in range(count):
        out[i] = cur
        cur = cur * base % p
    return out


def _bit_reverse_indices(n: int):
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class NttContext:
    """Per-prime-set NTT plan for negacyclic polynomials of length n.

    Forward transform maps coefficients a_k to evaluations a(psi^(2t+1)),
    t = 0..n-1, in natural order: the input is twisted by psi^k and run
    through a radix-2 Cooley-Tukey cyclic NTT with omega = psi^2.
    """

    def __init__(self, primes, n: int):
        self.primes = list(primes)
        self.n = n
        self.q = np.array(self.primes, dtype=np.uint64).reshape(-1, 1)
        self._bitrev = _bit_reverse_indices(n)

        psi_rows, ipsi_rows, ninv_rows = [], [], []
        stage_tw = [[] for _ in range(n.bit_length() - 1)]
        stage_itw = [[] for _ in range(n.bit_length() - 1)]
        for p in self.primes:
            psi = primitive_2n_root(p, 2 * n)
            omega = psi * psi % p
            psi_rows.append(_power_table(psi, n, p))
            ipsi_rows.append(_power_table(pow(psi, -1, p), n, p))
            ninv_rows.append(pow(n, -1, p))
            m, s = 1, 0
            while m < n:
                w = pow(omega, n // (2 * m), p)
                stage_tw[s].append(_power_table(w, m, p))
                stage_itw[s].append(_power_table(pow(w, -1, p), m, p))
                m *= 2
                s += 1
        self._psi = np.stack(psi_rows)
        self._ipsi = np.stack(ipsi_rows)
        self._ninv = np.array(ninv_rows, dtype=np.uint64).reshape(-1, 1)
        self._tw = [np.stack(rows) for rows in stage_tw]
        self._itw = [np.stack(rows) for rows in stage_itw]
        if HAVE_NUMBA:
            self._qs_flat = np.array(self.primes, dtype=np.uint64)
            self._tw_packed = np.concatenate(self._tw, axis=1)
            self._itw_packed = np.concatenate(self._itw, axis=1)
            self._twf = self._tw_packed.astype(np.float64)
            self._itwf = self._itw_packed.astype(np.float64)
            self._psif = self._psi.astype(np.float64)
            self._ipsi_scaled = mul_mod(self._ipsi, self._ninv, self.q)
            self._ipsi_scaledf = self._ipsi_scaled.astype(np.float64)

    def _select(self, table, rows):
        return table if rows is None else table[rows]

    def _butterflies(self, a, tables, rows):
        nprimes, n = a.shape
        q = self._select(self.q, rows)
        a = a[:, self._bitrev]
        m, s = 1, 0
        while m < n:
            w = self._select(tables[s], rows)[:, None, :]
            blk = a.reshape(nprimes, n // (2 * m), 2, m)
            u = blk[:, :, 0, :]
            t = mul_mod(blk[:, :, 1, :], w, q[:, :, None])
            a = np.concatenate(
                [add_mod(u, t, q[:, :, None]), sub_mod(u, t, q[:, :, None])],
                axis=2,
            ).reshape(nprimes, n)
            m *= 2
            s += 1
        return a

    def _rowmap(self, a, rows):
        if rows is None:
            return np.arange(a.shape[0], dtype=np.int64)
        return np.asarray(rows, dtype=np.int64)

    def forward(self, a, rows=None):
        """Coefficient -> evaluation domain. a: uint64 (k, n) residue stack."""
        if HAVE_NUMBA:
            out = np.array(a, dtype=np.uint64, order="C", copy=True)
            return _kernels.ntt_forward(
                out, self._rowmap(a, rows), self._psi, self._psif,
                self._bitrev, self._tw_packed, self._twf, self._qs_flat,
            )
        q = self._select(self.q, rows)
        twisted = mul_mod(a, self._select(self._psi, rows), q)
        return self._butterflies(twisted, self._tw, rows)

    def inverse(self, a, rows=None):
        """Evaluation -> coefficient domain."""
        if HAVE_NUMBA:
            out = np.array(a, dtype=np.uint64, order="C", copy=True)
            return _kernels.ntt_inverse(
                out, self._rowmap(a, rows), self._ipsi_scaled,
                self._ipsi_scaledf, self._bitrev, self._itw_packed,
                self._itwf, self._qs_flat,
            )
        q = self._select(self.q, rows)
        coeffs = self._butterflies(a, self._itw, rows)
        coeffs = mul_mod(coeffs, self._select(self._ninv, rows), q)
        return mul_mod(coeffs, self._select(self._ipsi, rows), q)


def to_residues(coeffs, primes):
    """Signed integer coefficients (float64 or int64) -> uint64 residue stack."""
    c = np.asarray(coeffs)
    if c.dtype != np.int64:
        c = np.round(c).astype(np.int64)
    out = np.empty((len(primes), c.shape[-1]), dtype=np.uint64)
    for i, p in enumerate(primes):
        out[i] = np.mod(c, np.int64(p)).astype(np.uint64)
    return out


def garner_digits(residues, primes):
    """Mixed-radix digits v of x from its residues: x = sum_i v_i * prod_{j<i} q_j."""
    k = len(primes)
    digits = []
    for i in range(k):
        t = residues[i]
        qi = np.uint64(primes[i])
        for j in range(i):
            t = sub_mod(t, np.mod(digits[j], qi), qi)
            inv = np.uint64(pow(primes[j] % primes[i], -1, primes[i]))
            t = mul_mod(t, inv, qi)
        digits.append(t)
    return digits


def residues_to_centered_float(residues, primes):
    """Exact-enough float64 value of the centered representative mod prod(primes).

    Valid when |centered value| << prod(primes); reconstruction error is
    bounded by ~|value| * 2^-50, far below any fixed-point scale in use.
    """
    digits = garner_digits(residues, primes)
    k = len(primes)
    top = digits[-1]
    negative = top >= np.uint64(primes[-1] // 2)
    pos = np.zeros(residues.shape[-1], dtype=np.float64)
    neg = np.ones(residues.shape[-1], dtype=np.float64)
    base = 1.0
    for i in range(k):
        pos += digits[i].astype(np.float64) * base
        neg += (primes[i] - 1 - digits[i].astype(np.int64)).astype(
            np.float64
        ) * base
        base *= float(primes[i])
    return np.where(negative, -neg, pos)
