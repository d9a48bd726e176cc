"""Deterministic, independently-seeded random streams.

Every source of randomness in the simulator is a named substream of one
master seed, so changing e.g. the DP noise draw never perturbs the
encryption or training draws of the same experiment.
"""

import hashlib

import numpy as np


def substream(master_seed: int, *tags) -> np.random.Generator:
    """Return a Generator for the substream named by ``tags``.

    Tags may be strings or integers; the same (master_seed, tags) always
    yields the same stream, and distinct tags yield independent streams.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for t in tags:
        h.update(b"/")
        h.update(str(t).encode())
    digest = int.from_bytes(h.digest()[:16], "little")
    return np.random.default_rng(np.random.SeedSequence(digest))


def substream_seed(master_seed: int, *tags) -> int:
    """Integer seed for the named substream (for APIs that take raw seeds)."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for t in tags:
        h.update(b"/")
        h.update(str(t).encode())
    return int.from_bytes(h.digest()[:8], "little")
