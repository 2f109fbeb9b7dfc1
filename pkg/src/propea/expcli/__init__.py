from .config import SCENARIOS, ConfigError, ExperimentConfig, scenario
from .experiment import ResultTable, emit_results, run_experiment, scaling_fit

__all__ = ["SCENARIOS", "ConfigError", "ExperimentConfig", "scenario",
           "ResultTable", "emit_results", "run_experiment", "scaling_fit"]
