"""Deterministic seed derivation.

Every random stream in the package is derived from a single master seed by
mixing it with small integer tags.  The mixer is the SplitMix64 finalizer
(constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB), so any
cell of a sweep can be recomputed in isolation from its indices alone.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix_seed(master: int, *tags: int) -> int:
    """Fold ``tags`` into ``master``; the result is a 64-bit unsigned int."""
    h = splitmix64(int(master) & _MASK)
    for tag in tags:
        h = splitmix64(h ^ (int(tag) & _MASK))
    return h


def make_rng(master: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(mix_seed(master, *tags))


# stream tags
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_TEST = 2
STREAM_TRIAL = 3
