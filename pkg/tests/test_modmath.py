"""Modular arithmetic and NTT kernels against brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddfed.errors import ParameterError
from ddfed.hecore import modmath as mm


def _schoolbook_negacyclic(a, b, n):
    out = np.zeros(n, dtype=object)
    for i in range(n):
        for j in range(n):
            k = i + j
            term = int(a[i]) * int(b[j])
            if k < n:
                out[k] += term
            else:
                out[k - n] -= term
    return out


@pytest.mark.parametrize("bits", [24, 30, 40, 48, 49])
def test_mul_mod_matches_python_ints(bits):
    p = mm.find_ntt_primes([bits], 2048)[0]
    rng = np.random.default_rng(bits)
    a = rng.integers(0, p, 20000, dtype=np.uint64)
    b = rng.integers(0, p, 20000, dtype=np.uint64)
    a[:4] = [0, p - 1, p - 1, 1]
    b[:4] = [0, p - 1, 1, p - 1]
    got = mm.mul_mod(a, b, np.uint64(p))
    want = np.array(
        [(int(x) * int(y)) % p for x, y in zip(a.tolist(), b.tolist())],
        dtype=np.uint64,
    )
    assert np.array_equal(got, want)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**49 - 1), st.integers(0, 2**49 - 1))
def test_mul_mod_property(a, b):
    p = 562949953392641  # 49-bit NTT prime
    a %= p
    b %= p
    got = mm.mul_mod(np.array([a], dtype=np.uint64),
                     np.array([b], dtype=np.uint64), np.uint64(p))
    assert int(got[0]) == (a * b) % p


def test_find_ntt_primes_properties():
    primes = mm.find_ntt_primes([30, 30, 40], 4096)
    assert len(set(primes)) == 3
    for p, bits in zip(primes, (30, 30, 40)):
        assert p % 4096 == 1
        assert mm._is_prime(p)
        assert p.bit_length() == bits


def test_find_ntt_primes_rejects_oversized():
    with pytest.raises(ParameterError):
        mm.find_ntt_primes([60], 2048)


def test_primitive_root_order():
    p = mm.find_ntt_primes([30], 256)[0]
    psi = mm.primitive_2n_root(p, 256)
    assert pow(psi, 128, p) == p - 1
    assert pow(psi, 256, p) == 1


@pytest.mark.parametrize("n", [8, 64, 256])
def test_ntt_roundtrip_and_convolution(n):
    primes = mm.find_ntt_primes([40, 30], 2 * n)
    ctx = mm.NttContext(primes, n)
    rng = np.random.default_rng(n)
    a = rng.integers(-500, 500, n).astype(np.int64)
    b = rng.integers(-500, 500, n).astype(np.int64)
    ra = mm.to_residues(a, primes)
    rb = mm.to_residues(b, primes)
    assert np.array_equal(ctx.inverse(ctx.forward(ra)), ra)
    prod = ctx.inverse(mm.mul_mod(ctx.forward(ra), ctx.forward(rb), ctx.q))
    ref = _schoolbook_negacyclic(a, b, n)
    for r, p in enumerate(primes):
        assert np.array_equal(
            prod[r], np.array([x % p for x in ref], dtype=np.uint64)
        )


@pytest.mark.skipif(not mm.HAVE_NUMBA, reason="numba unavailable")
def test_numba_and_numpy_paths_agree():
    n = 128
    primes = mm.find_ntt_primes([40, 40, 30], 2 * n)
    ctx = mm.NttContext(primes, n)
    rng = np.random.default_rng(0)
    rows = np.array([0, 1, 2, 1], dtype=np.int64)
    stack = np.stack(
        [rng.integers(0, primes[r], n, dtype=np.uint64) for r in rows]
    )
    fwd_nb = ctx.forward(stack, rows=rows)
    inv_nb = ctx.inverse(fwd_nb, rows=rows)
    mm.HAVE_NUMBA = False
    try:
        fwd_np = ctx.forward(stack, rows=rows)
        inv_np = ctx.inverse(fwd_np, rows=rows)
    finally:
        mm.HAVE_NUMBA = True
    assert np.array_equal(fwd_nb, fwd_np)
    assert np.array_equal(inv_nb, inv_np)


def test_centered_reconstruction_matches_python_ints():
    primes = mm.find_ntt_primes([40, 40, 30], 256)
    rng = np.random.default_rng(1)
    q = 1
    for p in primes:
        q *= p
    vals = [0, 1, -1, 2**50, -(2**50), 123456789123, -987654321987]
    vals += [int(x) for x in rng.integers(-2**60, 2**60, 40)]
    res = np.stack(
        [np.array([v % p for v in vals], dtype=np.uint64) for p in primes]
    )
    rec = mm.residues_to_centered_float(res, primes)
    assert np.allclose(rec, np.array(vals, dtype=np.float64), rtol=1e-12)


def test_garner_digits_reconstruct():
    primes = mm.find_ntt_primes([30, 30, 24], 64)
    rng = np.random.default_rng(2)
    q = primes[0] * primes[1] * primes[2]
    xs = [
        (int(hi) << 60 | int(lo)) % q
        for hi, lo in zip(rng.integers(0, 2**60, 30), rng.integers(0, 2**60, 30))
    ]
    res = np.stack(
        [np.array([x % p for x in xs], dtype=np.uint64) for p in primes]
    )
    digits = mm.garner_digits(res, primes)
    base = [1, primes[0], primes[0] * primes[1]]
    rebuilt = [
        sum(int(digits[i][j]) * base[i] for i in range(3))
        for j in range(len(xs))
    ]
    assert rebuilt == [x % q for x in xs]
