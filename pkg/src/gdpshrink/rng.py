"""Seed expansion.

Every random stream is a Philox (counter-based) generator keyed by the user's
64-bit seed plus a tuple of component labels, so replicate ``r`` of method
``m`` draws the same numbers no matter how work is scheduled.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & _MASK64


def make_rng(seed, *keys):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *keys)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed) & _MASK64] + [_label(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
