"""Counter-based random streams.

Every stream is a Philox generator keyed by a master seed plus a tuple of
integer coordinates (trial index, lattice tile, channel...).  The same key
always yields the same stream, independent of the order in which streams are
requested, which is what makes block-parallel and trial-parallel runs
bit-reproducible.
"""

import numpy as np

_OFFSET = 1 << 31


def _encode(k):
    k = int(k)
    if not -_OFFSET <= k < _OFFSET:
        raise ValueError(f"stream key component out of range: {k}")
    return k + _OFFSET


def stream(seed, *key):
    """Return the generator for ``(seed, *key)``; negative key parts allowed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_encode(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key):
    """Derive a child integer seed (63 bits) from ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_encode(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
