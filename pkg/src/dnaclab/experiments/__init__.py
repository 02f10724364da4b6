"""Scenario configuration, runner, metrics and command line."""
from .config import ScenarioConfig, load_scenario
from .metrics import MetricsReport, compare, compute_metrics
from .runner import Trace, run_scenario

__all__ = [
    "MetricsReport",
    "ScenarioConfig",
    "Trace",
    "compare",
    "compute_metrics",
    "load_scenario",
    "run_scenario",
]
