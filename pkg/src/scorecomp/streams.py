"""Counter-addressed random streams.

Every random draw in a run is addressed by a tuple of non-negative integers
(namespace, step, repeat, view, frame, ...) appended to the run seed.  Each
tuple maps to an independent Philox stream through ``SeedSequence`` spawn
keys, so the value drawn for one address never depends on how many other
addresses were touched before it or in which order.
"""

from __future__ import annotations

import numpy as np

# Namespaces keep the different consumers of randomness apart.
INIT = 0
RENOISE = 1
CONDITION = 2
AUX = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator addressed by ``(seed, *key)``."""
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and stream key entries must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def normal(seed: int, key: tuple[int, ...], size) -> np.ndarray:
    """Standard normal draws from the stream at ``key``."""
    return stream(seed, *key).standard_normal(size)
