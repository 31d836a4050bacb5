"""Deterministic stream derivation for parallel Monte-Carlo.

All randomness flows from one 64-bit root seed.  A stream is addressed by an
integer key tuple (for example (level, chunk_index) or (level, path_index));
the Philox counter-based generator seeded through a spawn-keyed SeedSequence
makes streams independent and their derivation order-free, so results do not
depend on how work is distributed over workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
