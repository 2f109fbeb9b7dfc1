"""Analytical quantities measured on live populations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bitcore import Population
from .fitness import FitnessSpec, optimum_value
from .operators import Mode, SelectionMode, selection_probabilities

DEFAULT_GAMMA_GRID = (0.01, 0.05, 0.1, 0.25)


def gamma_grid(gamma0: Optional[float] = None, base: Sequence[float] = DEFAULT_GAMMA_GRID) -> tuple:
    grid = set(base)
    if gamma0 is not None:
        grid.add(gamma0)
    return tuple(sorted(grid))


def rank_count(gamma: float, lam: int) -> int:
    """``ceil(gamma * lam)``, robust to float noise such as ``0.1 * 30``."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return max(1, math.ceil(round(gamma * lam, 9)))


def selection_values(f: np.ndarray, mode: SelectionMode) -> np.ndarray:
    """Values fed to the selection operator: raw fitness, or ``f ln c`` when scaled."""
    if mode.mode is Mode.SCALED:
        return np.asarray(f, dtype=float) * mode.log_c
    return np.asarray(f)


def cumulative_selection_prob(values, gamma: float, mode: SelectionMode) -> float:
    """Probability of selecting an individual at least as fit as the
    ``ceil(gamma*lam)``-ranked one.  Every individual tied with that
    threshold counts."""
    v = np.asarray(values)
    k = rank_count(gamma, v.shape[0])
    threshold = np.sort(v, kind="stable")[::-1][k - 1]
    p = selection_probabilities(v, mode)
    return float(p[v >= threshold].sum())


def reproductive_rates(values, mode: SelectionMode) -> np.ndarray:
    """Expected offspring count ``lam * p_sel(i)`` of each individual."""
    v = np.asarray(values)
    return v.shape[0] * selection_probabilities(v, mode)


def empirical_reproductive_counts(selected: np.ndarray, lam: int) -> np.ndarray:
    """Histogram ``R(i)`` of how often each parent index was drawn."""
    selected = np.asarray(selected)
    if selected.shape != (lam,):
        raise ValueError(f"expected {lam} selection indices, got shape {selected.shape}")
    if selected.size and (selected.min() < 0 or selected.max() >= lam):
        raise ValueError("selection index out of range")
    return np.bincount(selected, minlength=lam)


@dataclass(frozen=True)
class Deficit:
    Z: float
    normalized_mean: float


def deficit(f: np.ndarray, spec: FitnessSpec) -> Deficit:
    """``Z = lam f* - sum f`` and the mean fitness as a fraction of f*.

    ``f`` are unscaled fitness values of the population.
    """
    f = np.asarray(f)
    fstar = optimum_value(spec)
    lam = f.shape[0]
    total = f.sum().item()
    return Deficit(Z=lam * fstar - total, normalized_mean=total / (lam * fstar))


def zero_bits(pop: Population) -> np.ndarray:
    return pop.shape[1] - pop.sum(axis=1, dtype=np.int64)


def zero_bit_stats(pop: Population) -> tuple:
    """(min, mean) number of zero bits per individual."""
    z = zero_bits(pop)
    return int(z.min()), float(z.mean())


def level_histogram(f: np.ndarray, spec: FitnessSpec) -> np.ndarray:
    """Count of individuals per level, from unscaled fitness values."""
    part = spec.partition()
    return np.bincount(part.level_of_values(f), minlength=part.m)


@dataclass
class DiagSnapshot:
    t: int
    best_fitness: float
    mean_fitness: float
    deficit: float
    normalized_mean: float
    min_zero_bits: int
    mean_zero_bits: float
    level_counts: list
    beta: dict
    max_alpha: float
    fallback: bool
    alpha: Optional[np.ndarray] = field(default=None, repr=False)
    counts: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def optimum_present(self) -> bool:
        return self.level_counts[-1] > 0


def snapshot(t: int, pop: Population, f: np.ndarray, spec: FitnessSpec, mode: SelectionMode,
             gammas: Sequence[float] = DEFAULT_GAMMA_GRID, selected: Optional[np.ndarray] = None,
             fallback: bool = False, keep_vectors: bool = False) -> DiagSnapshot:
    """All diagnostics of one population.  ``selected`` is the index vector
    drawn from this population, when known."""
    vals = selection_values(f, mode)
    probs = selection_probabilities(vals, mode)
    lam = len(f)
    alpha = lam * probs
    d = deficit(f, spec)
    zmin, zmean = zero_bit_stats(pop)
    beta = {g: cumulative_selection_prob(vals, g, mode) for g in gammas}
    counts = empirical_reproductive_counts(selected, lam) if selected is not None else None
    return DiagSnapshot(
        t=t,
        best_fitness=f.max().item(),
        mean_fitness=float(f.mean()),
        deficit=d.Z,
        normalized_mean=d.normalized_mean,
        min_zero_bits=zmin,
        mean_zero_bits=zmean,
        level_counts=level_histogram(f, spec).tolist(),
        beta=beta,
        max_alpha=float(alpha.max()),
        fallback=fallback,
        alpha=alpha if keep_vectors else None,
        counts=counts if keep_vectors else None,
    )
