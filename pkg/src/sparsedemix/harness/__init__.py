"""Experiment configuration, runners and the command-line interface."""

from .config import ConfigError, ExperimentConfig
from .experiments import (CSV_COLUMNS, SCHEMA_ID, CellResult, deconv_demo, generate_instances,
                          read_phase_csv, run_phase, trial_spec, write_phase_csv)

__all__ = ["ConfigError", "ExperimentConfig", "CSV_COLUMNS", "SCHEMA_ID", "CellResult", "deconv_demo",
           "generate_instances", "read_phase_csv", "run_phase", "trial_spec", "write_phase_csv"]
