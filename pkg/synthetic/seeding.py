"""
Seed splitting for reproducible Monte Carlo replicates.

A run has a single root seed. Every independent stream (a replicate, a
sweep row, a population draw) is addressed by a tuple of integer keys and
gets the child SeedSequence(root, spawn_key=keys). Children depend only on
(root, keys), never on the order in which they are requested, so
replicates can run in any order or in parallel.
"""

from typing import Union

import numpy as np

from evaluation.exceptions import InvalidParameterError

SeedLike = Union[int, np.random.SeedSequence]

# first spawn-key component of each stream family
STREAM_SCENARIO = 1
STREAM_SWEEP_PT = 2
STREAM_SWEEP_WITHHOLD = 3
STREAM_POPULATION = 4
STREAM_VALIDATION = 5


def derive_seed(root: SeedLike, *keys: int) -> np.random.SeedSequence:
    if isinstance(root, np.random.SeedSequence):
        return np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in keys))
    if int(root) < 0:
        raise InvalidParameterError(f'seed must be non-negative, got {root}')
    return np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys))


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed))
