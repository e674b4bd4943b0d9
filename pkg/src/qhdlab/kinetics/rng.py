"""Counter-based random numbers keyed by (seed, step, stream, counter).

Every draw is a pure function of its key, so a cell's collisions do not
depend on which thread handles it or in what order cells are visited.
The mixer is the SplitMix64 finalizer; the compiled core reproduces the
same integers bit for bit.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED_SALT = np.uint64(0x632BE59BD9B4E019)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_key(seed, step, stream):
    with np.errstate(over="ignore"):
        k = mix64(np.uint64(seed) * GOLDEN + SEED_SALT)
        k = mix64(k ^ ((np.asarray(step, np.uint64) + _ONE) * GOLDEN))
        return mix64(k ^ ((np.asarray(stream, np.uint64) + _ONE) * GOLDEN))


def counter_bits(seed, step, stream, counter):
    """64 random bits for each (stream, counter) pair; arrays broadcast."""
    key = stream_key(seed, step, stream)
    with np.errstate(over="ignore"):
        return mix64(key + (np.asarray(counter, np.uint64) + _ONE) * GOLDEN)


def counter_uniform(seed, step, stream, counter):
    """Uniform doubles in [0, 1) with 53 random bits."""
    return (counter_bits(seed, step, stream, counter) >> _S11).astype(np.float64) * _INV53
