"""Deterministic random-stream derivation.

Every stochastic routine in the package draws from a generator obtained via
:func:`substream`, keyed by a master seed plus integer indices identifying the
unit of work (permutation replicate, season, event, ...). Streams derived this
way are independent of each other and of execution order, so results are
reproducible bit-for-bit no matter how the work is scheduled.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *indices: int) -> np.random.Generator:
    """Return a generator for the substream identified by (seed, *indices)."""
    return np.random.default_rng((int(seed), *map(int, indices)))
