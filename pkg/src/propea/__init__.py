"""Non-elitist evolutionary algorithms with fitness-proportionate selection
on pseudo-Boolean functions, with calculators for their runtime regimes."""

__version__ = "0.1.0"

from .bitcore import SeedSpec, bitstring, derive_seed, hamming, make_rng, new_random_population
from .fitness import (DecompSpec, LinearSpec, ScaledSpec, canonicalize_weights, evaluate, level_of,
                      onemax, optimum_value, royal_road, scaled_log_value)
from .operators import MutationParams, SelectionMode, bitwise_mutate, mutation_probability, \
    sample_selection, selection_probabilities
from .engine import RunConfig, RunTrace, run, step

__all__ = [
    "SeedSpec", "bitstring", "derive_seed", "hamming", "make_rng", "new_random_population",
    "DecompSpec", "LinearSpec", "ScaledSpec", "canonicalize_weights", "evaluate", "level_of",
    "onemax", "optimum_value", "royal_road", "scaled_log_value",
    "MutationParams", "SelectionMode", "bitwise_mutate", "mutation_probability",
    "sample_selection", "selection_probabilities",
    "RunConfig", "RunTrace", "run", "step",
]
