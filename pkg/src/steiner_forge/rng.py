"""Seeded random streams.

Every randomized routine takes an integer ``seed`` and derives its generator
here, so results are pure functions of (inputs, seed).

Stream-splitting rule: the generator for ``(seed, *stream)`` is built from
``numpy.random.SeedSequence(seed, spawn_key=stream)``.  Distinct stream keys
give statistically independent streams for the same base seed.  Scalar-heavy
inner loops use :class:`random.Random` (MT19937) seeded with 128 bits drawn
from that sequence; vectorised sampling uses ``numpy.random.Generator`` on
PCG64.  Both families are fixed; changing either is a breaking change and
must bump ``RNG_VERSION``.
"""

from __future__ import annotations

import random

import numpy as np

RNG_VERSION = "sf-rng-1 (SeedSequence -> MT19937 | PCG64)"


def _sequence(seed: int, stream: tuple[int, ...]) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))


def py_rng(seed: int, *stream: int) -> random.Random:
    words = _sequence(seed, stream).generate_state(4, dtype=np.uint32)
    value = 0
    for w in words:
        value = (value << 32) | int(w)
    return random.Random(value)


def np_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_sequence(seed, stream)))


def child_seed(seed: int, *stream: int) -> int:
    """A 63-bit integer seed for a sub-experiment, derived deterministically."""
    w = _sequence(seed, stream).generate_state(2, dtype=np.uint32)
    return ((int(w[0]) << 32) | int(w[1])) & ((1 << 63) - 1)
