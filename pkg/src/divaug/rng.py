"""Counter-style random streams derived from one master seed.

A stream is identified by ``(seed, purpose, *indices)``, so the draws an
image sees do not depend on how work is scheduled across threads.
"""
import numpy as np

# stream purposes
INIT = 1
SHUFFLE = 2
EXPAND = 3
SELECT = 4
BASELINE = 5
MEASURE = 6
SYNTHETIC = 7

_MASK64 = (1 << 64) - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    entropy = [int(seed) & _MASK64, *(int(k) for k in key)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
