"""Numba butterfly kernels for the RNS NTT. Optional: modmath falls back to
pure numpy when numba is unavailable."""

import numpy as np
from numba import njit


@njit(cache=True)
def ntt_forward(a, rowmap, psi, psif, bitrev, tw, twf, qs):
    """In-place negacyclic forward NTT of each row of `a`.

    rowmap[r] selects the prime-indexed tables for row r. tw/twf hold the
    per-stage twiddles packed contiguously (offsets 0, 1, 3, 7, ...).
    """
    rows, n = a.shape
    for r in range(rows):
        p = rowmap[r]
        q = qs[p]
        qinv = 1.0 / q
        row = a[r]
        for k in range(n):
            w = psi[p, k]
            x = row[k]
            quot = np.uint64(np.float64(x) * psif[p, k] * qinv)
            t = x * w - quot * q
            t1 = t + q
            if t1 < t:
                t = t1
            t2 = t - q
            if t2 < t:
                t = t2
            row[k] = t
        tmp = np.empty(n, dtype=np.uint64)
        for i in range(n):
            tmp[i] = row[bitrev[i]]
        for i in range(n):
            row[i] = tmp[i]
        m = 1
        toff = 0
        while m < n:
            for blk in range(0, n, 2 * m):
                for j in range(m):
                    w = tw[p, toff + j]
                    wf = twf[p, toff + j]
                    x = row[blk + j]
                    y = row[blk + j + m]
                    quot = np.uint64(np.float64(y) * wf * qinv)
                    t = y * w - quot * q
                    t1 = t + q
                    if t1 < t:
                        t = t1
                    t2 = t - q
                    if t2 < t:
                        t = t2
                    s = x + t
                    s2 = s - q
                    if s2 < s:
                        s = s2
                    d = x - t
                    d2 = d + q
                    if d2 < d:
                        d = d2
                    row[blk + j] = s
                    row[blk + j + m] = d
            toff += m
            m *= 2
    return a


@njit(cache=True)
def ntt_inverse(a, rowmap, ipsi_scaled, ipsi_scaledf, bitrev, itw, itwf, qs):
    """In-place inverse of ntt_forward; ipsi_scaled folds in 1/n."""
    rows, n = a.shape
    for r in range(rows):
        p = rowmap[r]
        q = qs[p]
        qinv = 1.0 / q
        row = a[r]
        tmp = np.empty(n, dtype=np.uint64)
        for i in range(n):
            tmp[i] = row[bitrev[i]]
        for i in range(n):
            row[i] = tmp[i]
        m = 1
        toff = 0
        while m < n:
            for blk in range(0, n, 2 * m):
                for j in range(m):
                    w = itw[p, toff + j]
                    wf = itwf[p, toff + j]
                    x = row[blk + j]
                    y = row[blk + j + m]
                    quot = np.uint64(np.float64(y) * wf * qinv)
                    t = y * w - quot * q
                    t1 = t + q
                    if t1 < t:
                        t = t1
                    t2 = t - q
                    if t2 < t:
                        t = t2
                    s = x + t
                    s2 = s - q
                    if s2 < s:
                        s = s2
                    d = x - t
                    d2 = d + q
                    if d2 < d:
                        d = d2
                    row[blk + j] = s
                    row[blk + j + m] = d
            toff += m
            m *= 2
        for k in range(n):
            w = ipsi_scaled[p, k]
            x = row[k]
            quot = np.uint64(np.float64(x) * ipsi_scaledf[p, k] * qinv)
            t = x * w - quot * q
            t1 = t + q
            if t1 < t:
                t = t1
            t2 = t - q
            if t2 < t:
                t = t2
            row[k] = t
    return a
