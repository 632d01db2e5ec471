"""Seeded random generation and deterministic seed derivation.

All randomness in the package flows through numpy's PCG64 bit generator
(normal variates via numpy's ziggurat implementation).  The generator
identity is stamped into output files so datasets stay reproducible
across releases.
"""
from __future__ import annotations

import numpy as np

RNG_IDENTITY = "numpy-pcg64-ziggurat"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def make_generator(seed: int) -> np.random.Generator:
    """Return a fresh PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def splitmix64(state: int) -> int:
    """One output of the splitmix64 mixing function."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fold(value) -> int:
    if isinstance(value, str):
        acc = len(value) & _MASK64
        for chunk in value.encode("utf-8"):
            acc = splitmix64(acc ^ chunk)
        return acc
    return int(value) & _MASK64


def derive_seed(base: int, *parts) -> int:
    """Derive an independent 64-bit seed from a base seed and stream labels.

    Labels may be integers (replication indices) or short strings (stream
    names).  The derivation is pure integer arithmetic, identical on every
    platform, so replication r always sees the same stream regardless of
    worker count or execution order.
    """
    state = splitmix64(int(base) & _MASK64)
    for part in parts:
        state = splitmix64(state ^ _fold(part))
    return state
