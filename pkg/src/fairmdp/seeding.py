"""Counter-based, splittable random streams.

Every random draw in the package comes from a Philox generator keyed by a
root seed plus a spawn key, so a (seed, stream) pair maps to the same
sequence on every platform and independent streams never overlap.
"""

from __future__ import annotations

import numpy as np

# Spawn keys for the well-known streams of one experiment seed.
MDP_STREAM = 0
ALGORITHM_STREAM = 1
DATA_STREAM = 2


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))
