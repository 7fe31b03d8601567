"""Public API for the stochastic approximation toolkit."""

from .core.experiment_service import ExperimentService, ExperimentSummary, run_experiment
from .ports.config_parser import ExperimentConfig, parse_config, serialize

__all__ = [
    "ExperimentService",
    "ExperimentSummary",
    "run_experiment",
    "ExperimentConfig",
    "parse_config",
    "serialize",
]
