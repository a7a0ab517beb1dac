"""Per-purpose random streams derived from one root seed.

Every consumer of randomness asks for a generator keyed by
``(root_seed, purpose, *extra)``. Streams for different purposes never
share state, so re-running one stage (e.g. only training) reproduces the
exact numbers of a full run.
"""

from __future__ import annotations

import numpy as np

SPLIT = 1
INIT = 2
DROPOUT = 3
AUGMENT = 4
SHUFFLE = 5
TSNE = 6
SYNTH = 7
NOISE = 8


def rng_for(root_seed: int, purpose: int, *extra: int) -> np.random.Generator:
    key = [int(root_seed) & 0xFFFFFFFF, purpose, *(int(e) & 0xFFFFFFFF for e in extra)]
    return np.random.default_rng(np.random.SeedSequence(key))
