"""Experiment runner and command-line entry point."""
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import run_experiment, summarize, sweep

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run_experiment", "summarize", "sweep"]
