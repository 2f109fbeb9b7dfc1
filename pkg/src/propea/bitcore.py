"""Bitstrings, populations and seeded random streams.

A bitstring is a 1-D ``uint8`` numpy array of 0/1 values and a population
is a 2-D ``uint8`` array of shape ``(lam, n)``; row ``i`` is individual
``P(i)``.  Bit position 1 in the usual mathematical indexing is column 0.
Rows are never reordered implicitly, since selection probabilities and
the sampled index vectors refer to them by position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

#: Identifier written into result metadata.
PRNG_NAME = "numpy.random.PCG64"

BitString = np.ndarray
Population = np.ndarray


class InvariantError(ValueError):
    """Raised when a bitstring or population violates its shape contract."""


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    replicate_index: int

    def __post_init__(self):
        if not 0 <= self.base_seed <= MASK64:
            raise ValueError(f"base_seed must fit in 64 bits, got {self.base_seed}")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be non-negative")


def derive_seed(spec: SeedSpec) -> int:
    """Seed for one replicate: ``base XOR ((index + 1) * golden_gamma mod 2**64)``.

    The multiplier is odd, so the map is injective in the replicate index
    for a fixed base.
    """
    return spec.base_seed ^ (((spec.replicate_index + 1) * GOLDEN_GAMMA) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def bitstring(bits: Union[str, Iterable[int]]) -> BitString:
    """Build a bitstring from ``"0110"`` or an iterable of 0/1 ints."""
    if isinstance(bits, str):
        vals = [int(ch) for ch in bits if not ch.isspace()]
    else:
        vals = [int(b) for b in bits]
    if not vals:
        raise InvariantError("bitstring length must be >= 1")
    if any(v not in (0, 1) for v in vals):
        raise InvariantError("bits must be 0 or 1")
    return np.array(vals, dtype=np.uint8)


def to_str(x: BitString) -> str:
    return "".join("1" if b else "0" for b in x)


def population(rows: Iterable) -> Population:
    """Stack bitstrings (or strings) into a population array."""
    members = [r if isinstance(r, np.ndarray) else bitstring(r) for r in rows]
    if not members:
        raise InvariantError("population size must be >= 1")
    n = members[0].shape[0]
    if any(m.ndim != 1 or m.shape[0] != n for m in members):
        raise InvariantError("all members must share one length")
    return np.stack(members).astype(np.uint8, copy=False)


def check_population(pop: Population) -> None:
    if pop.ndim != 2 or pop.shape[0] < 1 or pop.shape[1] < 1:
        raise InvariantError(f"population must be a non-empty (lam, n) array, got shape {pop.shape}")


def new_random_population(n: int, lam: int, rng: np.random.Generator) -> Population:
    """Uniform initial population: every bit is an independent fair coin."""
    return rng.integers(0, 2, size=(lam, n), dtype=np.uint8)


def hamming(x: BitString, y: BitString) -> int:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise InvariantError(f"length mismatch: {x.shape} vs {y.shape}")
    return int(np.count_nonzero(x != y))


def all_bitstrings(n: int) -> Population:
    """Every string of length ``n`` as a ``(2**n, n)`` array; row k encodes k with bit 1 = LSB."""
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)
