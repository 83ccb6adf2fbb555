"""Configuration, experiments, statistics and the command-line interface."""
from .config import ExperimentConfig, config_from_mapping, load_config
from .experiments import StatSummary, run_experiment
from .stats import empirical_covariance, rate_regression
