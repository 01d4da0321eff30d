"""Scenario files, comparison metrics, benchmarks, experiment presets and the CLI."""

from .bench import InsufficientMemoryError, PerfReport, bench
from .experiments import PRESETS, THRESHOLDS, ExperimentError, ExperimentResult, run_experiment
from .metrics import ComparisonReport, compare, oscillation_index, rise_time
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario, save_scenario

__all__ = ["InsufficientMemoryError", "PerfReport", "bench", "PRESETS", "THRESHOLDS",
           "ExperimentError", "ExperimentResult", "run_experiment", "ComparisonReport",
           "compare", "oscillation_index", "rise_time", "Scenario", "ScenarioError",
           "load_scenario", "parse_scenario", "save_scenario"]
