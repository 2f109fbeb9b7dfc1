"""Non-elitist generational loop.

Each generation draws ``lam`` parent indices from the current population
and mutates a copy of each selected parent; nothing survives except through
selection followed by mutation.

Evaluation accounting: the initial population is not charged, so an optimum
in ``P_0`` gives ``T = 0``.  Generation ``t -> t+1`` charges ``lam``
evaluations, except that the run stops at the first offspring (in index
order) that reaches the optimum, charging evaluations up to and including
it.  ``T_coarse = lam * t`` is the generation-granular runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bitcore import Population, check_population, make_rng, new_random_population
from .diagnostics import DEFAULT_GAMMA_GRID, DiagSnapshot, selection_values, snapshot, zero_bits
from .fitness import FitnessSpec, ScaledSpec, evaluate, optimum_value
from .operators import (Mode, MutationParams, SelectionMode, mutate_population,
                        sample_selection, selection_probabilities, zero_total_fitness)


@dataclass(frozen=True)
class RunConfig:
    fitness: FitnessSpec
    selection: SelectionMode
    chi: float
    lam: int
    max_evaluations: int
    max_generations: Optional[int] = None
    cadence: int = 1
    seed: int = 0
    gammas: Sequence[float] = DEFAULT_GAMMA_GRID

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.max_generations is not None and self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        MutationParams(self.chi, self.n)
        sel = self.selection
        if isinstance(self.fitness, ScaledSpec):
            if sel.mode is Mode.PROPORTIONATE:
                object.__setattr__(self, "selection", SelectionMode.scaled(self.fitness.c))
            elif sel.mode is Mode.SCALED and sel.c != self.fitness.c:
                raise ValueError("scaling base in fitness and selection disagree")
        if self.selection.mode is Mode.TRUNCATION and self.selection.mu > self.lam:
            raise ValueError("truncation mu exceeds lam")

    @property
    def n(self) -> int:
        return self.fitness.n

    @property
    def rate(self) -> float:
        return self.chi / self.n


@dataclass
class RunTrace:
    records: List[DiagSnapshot] = field(default_factory=list)
    found: bool = False
    T: Optional[int] = None
    T_coarse: Optional[int] = None
    generations: int = 0
    evaluations: int = 0
    fallback_generations: int = 0
    min_zero_bits_ever: int = 0
    final_best: float = 0
    seed: int = 0

    @property
    def outcome(self) -> str:
        return "found" if self.found else "budget_exhausted"


def step(pop: Population, config: RunConfig, rng: np.random.Generator, f: Optional[np.ndarray] = None):
    """One generation: returns ``(P_next, I)`` with ``I`` the 0-based parent indices."""
    check_population(pop)
    if f is None:
        f = evaluate(config.fitness, pop)
    vals = selection_values(f, config.selection)
    probs = selection_probabilities(vals, config.selection)
    selected = sample_selection(probs, rng, pop.shape[0])
    children = pop[selected]
    mutate_population(children, config.rate, rng)
    return children, selected


def run(config: RunConfig, initial: Optional[Population] = None) -> RunTrace:
    """Run until an optimum appears or the budget is spent.

    ``initial`` replaces the uniform initial population (it is copied).
    """
    rng = make_rng(config.seed)
    spec, mode, lam = config.fitness, config.selection, config.lam
    if initial is None:
        pop = new_random_population(config.n, lam, rng)
    else:
        pop = np.array(initial, dtype=np.uint8, copy=True)
        check_population(pop)
        if pop.shape != (lam, config.n):
            raise ValueError(f"initial population shape {pop.shape} != {(lam, config.n)}")
    fstar = optimum_value(spec)
    top = fstar - spec.partition().slack
    f = evaluate(spec, pop)
    trace = RunTrace(seed=config.seed)
    zmin = int(zero_bits(pop).min())
    t = 0
    evals = 0

    def record(selected=None, fallback=False):
        trace.records.append(snapshot(t, pop, f, spec, mode, config.gammas, selected, fallback))

    if np.any(f >= top):
        trace.found, trace.T, trace.T_coarse = True, 0, 0
        record()
    else:
        while True:
            if evals >= config.max_evaluations or (
                    config.max_generations is not None and t >= config.max_generations):
                record()
                break
            vals = selection_values(f, mode)
            fallback = zero_total_fitness(vals, mode)
            trace.fallback_generations += fallback
            selected = sample_selection(selection_probabilities(vals, mode), rng, lam)
            if t % config.cadence == 0:
                record(selected, fallback)
            pop = pop[selected]
            mutate_population(pop, config.rate, rng)
            f = evaluate(spec, pop)
            t += 1
            zmin = min(zmin, int(zero_bits(pop).min()))
            budget_left = config.max_evaluations - evals
            hits = np.flatnonzero(f[:budget_left] >= top)
            if hits.size:
                evals += int(hits[0]) + 1
                trace.found, trace.T, trace.T_coarse = True, evals, t * lam
                record()
                break
            evals += min(lam, budget_left)
    trace.generations = t
    trace.evaluations = evals
    trace.min_zero_bits_ever = zmin
    trace.final_best = f.max().item()
    return trace


def trace_rows(trace: RunTrace) -> List[dict]:
    """Flat per-record dicts for CSV output."""
    rows = []
    for r in trace.records:
        row = {"t": r.t, "best_f": r.best_fitness, "mean_f": r.mean_fitness, "Z_t": r.deficit,
               "min_zero_bits": r.min_zero_bits}
        for g, b in sorted(r.beta.items()):
            row[f"beta@{g:g}"] = b
        row["fallback_flag"] = int(r.fallback)
        rows.append(row)
    return rows
