"""Selection and bitwise mutation.

Selection works on a vector of fitness values, one per population row, and
returns a probability vector over row indices (0-based).  Sampling uses the
inverse CDF: one uniform draw ``u`` per slot, scaled by the total mass, and
``searchsorted(cumsum(p), u, side="right")``.  Given the random stream this
is deterministic and never returns a zero-probability index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bitcore import BitString, InvariantError, Population, hamming


class Mode(str, enum.Enum):
    PROPORTIONATE = "proportionate"
    SCALED = "scaled"
    UNIFORM = "uniform"
    TRUNCATION = "truncation"


@dataclass(frozen=True)
class SelectionMode:
    """Selection mechanism.  ``c`` is the scaling base for SCALED, ``mu`` the
    number of survivors for TRUNCATION."""

    mode: Mode = Mode.PROPORTIONATE
    c: Optional[float] = None
    mu: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.SCALED and not (self.c is not None and self.c > 1):
            raise ValueError("scaled proportionate selection needs c > 1")
        if self.mode is Mode.TRUNCATION and not (self.mu is not None and self.mu >= 1):
            raise ValueError("truncation selection needs mu >= 1")

    @classmethod
    def proportionate(cls):
        return cls(Mode.PROPORTIONATE)

    @classmethod
    def scaled(cls, c: float):
        return cls(Mode.SCALED, c=c)

    @classmethod
    def uniform(cls):
        return cls(Mode.UNIFORM)

    @classmethod
    def truncation(cls, mu: int):
        return cls(Mode.TRUNCATION, mu=mu)

    @property
    def log_c(self) -> float:
        return math.log(self.c)

    def label(self) -> str:
        if self.mode is Mode.SCALED:
            return f"scaled(c={self.c:g})"
        if self.mode is Mode.TRUNCATION:
            return f"truncation(mu={self.mu})"
        return self.mode.value


def zero_total_fitness(values, mode: SelectionMode) -> bool:
    """True when proportionate selection is undefined (0/0) and falls back to uniform."""
    return mode.mode is Mode.PROPORTIONATE and not np.any(np.asarray(values) > 0)


def selection_probabilities(values, mode: SelectionMode) -> np.ndarray:
    """Per-individual selection probabilities.

    For SCALED mode ``values`` are log-fitnesses ``f ln c``; the distribution
    is computed as a max-shifted softmax so ``c ** f`` is never formed.
    """
    v = np.asarray(values, dtype=float)
    lam = v.shape[0]
    if lam < 1:
        raise InvariantError("empty population")
    if mode.mode is Mode.PROPORTIONATE:
        if np.any(v < 0):
            raise ValueError("proportionate selection needs non-negative fitness")
        total = v.sum()
        if total <= 0:
            return np.full(lam, 1.0 / lam)
        return v / total
    if mode.mode is Mode.SCALED:
        if not np.all(np.isfinite(v)):
            raise ValueError("log-fitness must be finite")
        w = np.exp(v - v.max())
        return w / w.sum()
    if mode.mode is Mode.UNIFORM:
        return np.full(lam, 1.0 / lam)
    mu = mode.mu
    if mu > lam:
        raise ValueError(f"truncation mu={mu} exceeds population size {lam}")
    best = np.argsort(-v, kind="stable")[:mu]
    p = np.zeros(lam)
    p[best] = 1.0 / mu
    return p


def sample_selection(probs: np.ndarray, rng: np.random.Generator, size: Optional[int] = None):
    """Draw index/indices (0-based) from ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs)
    u = rng.random(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # u < cdf[-1] guarantees idx < len(probs) except for rounding at the top.
    return np.minimum(idx, len(probs) - 1)


@dataclass(frozen=True)
class MutationParams:
    chi: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.chi <= self.n:
            raise ValueError(f"need 0 < chi <= n, got chi={self.chi}, n={self.n}")

    @property
    def rate(self) -> float:
        return self.chi / self.n


def mutate_population(pop: Population, rate: float, rng: np.random.Generator) -> None:
    """Flip every bit of ``pop`` independently with probability ``rate``, in place.

    Flip positions over the flattened array are generated by geometric
    gaps, so the cost is proportional to the number of flips.
    """
    flat = pop.reshape(-1)
    total = flat.size
    if rate <= 0:
        return
    if rate >= 1:
        flat ^= 1
        return
    pos = -1
    while True:
        k = int(1.2 * (total - pos) * rate) + 16
        idx = pos + np.cumsum(rng.geometric(rate, size=k))
        hit = idx[idx < total]
        flat[hit] ^= 1
        if hit.size < k:
            return
        pos = int(idx[-1])


def bitwise_mutate(x: BitString, params: MutationParams, rng: np.random.Generator) -> BitString:
    y = np.array(x, dtype=np.uint8, copy=True)
    if y.shape != (params.n,):
        raise InvariantError(f"expected length {params.n}, got {y.shape}")
    mutate_population(y.reshape(1, -1), params.rate, rng)
    return y


def log_mutation_probability(distance, n: int, rate: float):
    """``log p_mut(y|x)`` as a function of the Hamming distance."""
    d = np.asarray(distance, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        flip = np.where(d > 0, d * math.log(rate) if rate > 0 else -np.inf, 0.0)
        keep = np.where(n - d > 0, (n - d) * (math.log1p(-rate) if rate < 1 else -np.inf), 0.0)
    out = flip + keep
    return out.item() if out.ndim == 0 else out


def mutation_probability(x: BitString, y: BitString, params: MutationParams) -> float:
    """Exact ``(chi/n)^H (1-chi/n)^(n-H)`` evaluated in the log domain."""
    return math.exp(log_mutation_probability(hamming(x, y), params.n, params.rate))
