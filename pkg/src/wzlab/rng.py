"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(master seed, purpose, *key)``.  Streams for different purposes never
overlap, and a stream's ``i``-th value does not depend on how many values
are drawn, so sample ``i`` of batch ``b`` is identical whatever the block
length or the number of worker threads.
"""

import numpy as np

PURPOSES = {
    "y": 0,
    "noise": 1,
    "phi": 2,
    "test": 3,
    "codebook": 4,
    "bins": 5,
    "encoder": 6,
    "gauss": 7,
}

SEED_MASK = (1 << 64) - 1


def stream(seed, purpose, *key):
    """Return an independent generator for ``purpose`` and integer ``key``."""
    if purpose not in PURPOSES:
        raise KeyError(f"unknown stream purpose {purpose!r}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MASK:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(
        entropy=seed, spawn_key=(PURPOSES[purpose],) + tuple(int(k) for k in key)
    )
    return np.random.Generator(np.random.Philox(ss))
