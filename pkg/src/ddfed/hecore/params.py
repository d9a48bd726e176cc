"""Parameter sets for the leveled HE backends."""

from dataclasses import dataclass

from ..errors import ParameterError
from .modmath import MAX_PRIME_BITS

# Chain layout: [base, rescale primes..., key-switching prime]. Four rescale
# primes cover the deepest ciphertext lineage a round produces: fusion-weight
# multiply, norm-verification multiply, similarity ct-ct multiply, and the
# score-packing mask multiply.
DESK_CHAIN = (48, 40, 40, 40, 40, 48)


@dataclass(frozen=True)
class HeParams:
    """Ring and modulus-chain description shared by both backends.

    ring_degree: power-of-two polynomial ring dimension N (slots = N/2).
    modulus_chain: prime bit sizes; the final entry is the key-switching
        prime, the first is the decryption base, the rest rescale once each.
    scale_bits: log2 of the fixed-point encoding scale.
    """

    ring_degree: int = 8192
    modulus_chain: tuple = DESK_CHAIN
    scale_bits: int = 40
    preset: str = "desk"

    def __post_init__(self):
        n = self.ring_degree
        if n < 1024 or n & (n - 1):
            raise ParameterError(
                f"ring_degree must be a power of two >= 1024, got {n}"
            )
        chain = tuple(self.modulus_chain)
        object.__setattr__(self, "modulus_chain", chain)
        if len(chain) < 3:
            raise ParameterError("modulus_chain needs at least 3 primes")
        for bits in chain:
            if not 20 <= bits <= MAX_PRIME_BITS:
                raise ParameterError(
                    f"chain prime size {bits} outside [20, {MAX_PRIME_BITS}]"
                )
        if self.scale_bits < 20 or self.scale_bits > 50:
            raise ParameterError("scale_bits must lie in [20, 50]")

    @property
    def slot_count(self) -> int:
        return self.ring_degree // 2

    @property
    def max_level(self) -> int:
        """Level of a fresh ciphertext (= number of rescale primes)."""
        return len(self.modulus_chain) - 2

    @property
    def scale(self) -> float:
        return float(2 ** self.scale_bits)


# Encoder safe range: encrypt_vec rejects values beyond this by default.
DEFAULT_ENCODE_RANGE = 2.0 ** 10


def desk_params() -> HeParams:
    return HeParams()


def secure_params() -> HeParams:
    """Larger-ring parameter set. Named only; carries no security estimate."""
    return HeParams(ring_degree=32768, modulus_chain=DESK_CHAIN,
                    scale_bits=40, preset="secure")


def preset(name: str) -> HeParams:
    if name == "desk":
        return desk_params()
    if name == "secure":
        return secure_params()
    raise ParameterError(f"unknown HE preset {name!r}")
