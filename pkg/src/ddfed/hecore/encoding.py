"""Fixed-point slot encoding via the canonical embedding.

A real vector of length N/2 is placed in the slots of a polynomial in
R[X]/(X^N + 1): slot j holds p(zeta^(5^j mod 2N)) for the primitive 2N-th
complex root zeta, with conjugate slots carrying the mirrored values so the
coefficients come out real. The 5^j ordering makes the Galois map X -> X^(5^r)
act as a cyclic rotation by r slots.

The transform is computed with an FFT of length N on psi-twisted
coefficients: p(zeta^(2t+1)) = FFT(p_k * zeta^k)[t].
"""

import numpy as np

from ..errors import EncodeRangeError

_CACHE = {}


class SlotEncoder:
    def __init__(self, n: int):
        self.n = n
        self.slots = n // 2
        zeta = np.exp(2j * np.pi / (2 * n))
        self._twist = zeta ** np.arange(n)
        self._untwist = zeta ** (-np.arange(n))
        # slot j sits at exponent 5^j mod 2N, i.e. FFT bin (5^j - 1) / 2
        exps = np.empty(self.slots, dtype=np.int64)
        e = 1
        for j in range(self.slots):
            exps[j] = e
            e = (e * 5) % (2 * n)
        self._slot_bins = (exps - 1) // 2
        self._conj_bins = n - 1 - self._slot_bins

    def encode(self, values, scale: float):
        """Real slot values -> integer coefficient vector (float64, rounded)."""
        z = np.zeros(self.slots, dtype=np.complex128)
        values = np.asarray(values, dtype=np.float64)
        z[: len(values)] = values
        spectrum = np.zeros(self.n, dtype=np.complex128)
        spectrum[self._slot_bins] = z
        spectrum[self._conj_bins] = np.conj(z)
        # spectrum[t] = sum_k (p_k zeta^k) e^{+2pi i kt/N}: invert with fft/N
        coeffs = np.fft.fft(spectrum) / self.n * self._untwist
        scaled = np.round(np.real(coeffs) * scale)
        if np.max(np.abs(scaled), initial=0.0) >= 2.0 ** 52:
            raise EncodeRangeError(
                "encoded coefficients exceed the exact float64 range; "
                "reduce input magnitude or scale"
            )
        return scaled

    def decode(self, coeffs, scale: float, count: int):
        """Float coefficient vector -> first `count` real slot values."""
        twisted = np.asarray(coeffs, dtype=np.float64) * self._twist
        spectrum = np.fft.ifft(twisted) * self.n
        return np.real(spectrum[self._slot_bins[:count]]) / scale

    def rotation_exponent(self, steps: int) -> int:
        """Galois element g with (slot j) <- (slot j + steps)."""
        return pow(5, steps % self.slots, 2 * self.n)


def encoder_for(n: int) -> SlotEncoder:
    enc = _CACHE.get(n)
    if enc is None:
        enc = _CACHE[n] = SlotEncoder(n)
    return enc
