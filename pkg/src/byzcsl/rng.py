"""Seeded random streams.

Every stream is a PCG64 generator keyed by ``(seed, purpose, index...)`` through
:class:`numpy.random.SeedSequence`, so workers, replicates and data draws get
independent, reproducible substreams regardless of execution order.
"""
import numpy as np

DATA = 0
MEMBERSHIP = 1
ATTACK = 2
SHARDING = 3
TEST_DATA = 4
REPLICATE = 5

_MASK = (1 << 64) - 1


def stream(seed, purpose, *index):
    key = [int(seed) & _MASK, int(purpose), *(int(i) for i in index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def derive_seed(seed, *index):
    """A 64-bit child seed, e.g. the seed of replicate ``r``."""
    ss = np.random.SeedSequence([int(seed) & _MASK, REPLICATE, *(int(i) for i in index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
