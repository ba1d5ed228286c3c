"""Orchestration: configuration, verification suites, CLI."""

from .config import ExperimentConfig, load_config, make_drift
from .suites import SuiteCheck, SuiteReport, run_suite

__all__ = ["ExperimentConfig", "SuiteCheck", "SuiteReport", "load_config",
           "make_drift", "run_suite"]
