"""Exception types shared across the package."""


class DdfedError(Exception):
    """Base class for all package errors."""


class ParameterError(DdfedError):
    """Invalid configuration or parameter set."""


class ShapeError(DdfedError):
    """Operands have incompatible dimensions."""


class EncodeRangeError(DdfedError):
    """Value exceeds the encoder's safe fixed-point range."""


class LevelError(DdfedError):
    """Ciphertext level budget exhausted or mismatched."""


class KeyError_(DdfedError):
    """Missing or mismatched key material."""


class KeyMismatchError(KeyError_):
    """Ciphertext was produced under a different key set."""


class MissingSecretKeyError(KeyError_):
    """Operation requires a secret key that this key set does not hold."""


class WeightError(DdfedError):
    """Fusion weights violate their normalization constraint."""


class NormalizationError(DdfedError):
    """Zero-norm vector where a direction is required."""


class DataError(DdfedError):
    """Empty or inconsistent dataset."""


class FormatError(DdfedError):
    """Malformed binary input (IDX or serialized ciphertext)."""


class AttackError(DdfedError):
    """Attack precondition violated."""


class ProtocolError(DdfedError):
    """A round step could not be executed."""
