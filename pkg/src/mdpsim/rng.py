"""Deterministic random streams keyed by (master seed, index, ...).

Every replica, environment side and scan cell draws from its own Philox
stream. The stream depends only on the master seed and the integer key, so
results do not depend on the order in which work is scheduled.
"""

import numpy as np

# Stream tags, used as the last component of a key.
ENV = 0
NOISE = 1


def stream(seed, *key):
    """Return a Philox generator for ``(seed, *key)``.

    Parameters
    ----------
    seed : int, tuple of int or numpy.random.Generator
        Master seed. A tuple ``(master, k1, k2, ...)`` prefixes ``key``. A
        Generator is passed through unchanged so callers can drive a single
        simulation from their own stream.
    *key : int
        Non-negative integers identifying the sub-stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(_sequence(seed, key)))


def subkey(seed, *key):
    """Extend a seed with more key components: ``(master, ..., *key)``."""
    if isinstance(seed, tuple):
        return seed + tuple(int(k) for k in key)
    return (int(seed),) + tuple(int(k) for k in key)


def _sequence(seed, key):
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    if isinstance(seed, tuple):
        master, prefix = seed[0], tuple(seed[1:])
    else:
        master, prefix = seed, ()
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in prefix + key))
