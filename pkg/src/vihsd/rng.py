"""Seeded random streams.

Every stochastic step in the package (weight init, shuffling, dropout masks,
OOV embedding rows, data splits) draws from a :class:`numpy.random.Generator`
backed by the PCG64 bit generator (PCG XSL RR 128/64, O'Neill 2014).  The
seed is a 64-bit integer; numpy seeds PCG64 through ``SeedSequence`` so a
given seed yields the same stream on every platform numpy supports.
"""
from __future__ import annotations

import numpy as np

RngState = np.random.Generator

DEFAULT_SEED = 1234


def make_rng(seed: int | None = DEFAULT_SEED) -> RngState:
    if seed is None:
        seed = DEFAULT_SEED
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_rng(rng: RngState | int | None) -> RngState:
    """Accept a generator, a seed, or None (default seed)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)
