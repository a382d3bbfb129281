"""Deterministic RNG sub-stream derivation.

Every stochastic routine in the package draws from a generator derived from
the root seed plus a tuple of integer purpose tags.  Streams for different
purposes (or different users, generations, individuals) are statistically
independent, so adding users to a run or probes to an optimizer never
perturbs the draws of existing ones.
"""

import numpy as np

# Purpose codes, kept in one table to avoid accidental collisions between
# modules.  The code is always the first tag after the root seed.
BS_RIS = 1
RIS_USER = 2
BS_USER = 3
SPECULAR = 4
CSI_ERROR = 5
SYMBOLS = 6
NOISE = 7
INIT_POPULATION = 8
DE_INDIVIDUAL = 9
LOCAL_SEARCH = 10
RANDOM_PHASES = 11
GA_INDIVIDUAL = 12


def substream(seed, *tags):
    """Return a ``numpy.random.Generator`` for the given (seed, tags) stream.

    ``seed`` and every tag must be non-negative integers.
    """
    entropy = (int(seed),) + tuple(int(t) for t in tags)
    if any(e < 0 for e in entropy):
        raise ValueError(f"stream keys must be non-negative, got {entropy}")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def complex_normal(rng, shape, variance=1.0):
    """Draw i.i.d. circularly symmetric complex Gaussians, CN(0, variance)."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
