"""Seeded experiment scenarios, statistics, configuration and reports."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import Metric, RunReport
from .stats import bimodality_coefficient, bootstrap_mean_ci, energy_distance, energy_permutation_test

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Metric",
    "RunReport",
    "bimodality_coefficient",
    "bootstrap_mean_ci",
    "energy_distance",
    "energy_permutation_test",
    "load_config",
    "parse_config",
]
