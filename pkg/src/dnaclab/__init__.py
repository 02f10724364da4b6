"""Quadrotor attitude-control lab: a deep nonlinear adaptive controller
(DNAC) with PID, MRAC and deep MRAC baselines on a simulated, disturbed
quadrotor."""
from ._backend import USE_NUMBA
from .experiments import MetricsReport, ScenarioConfig, load_scenario, run_scenario

__version__ = "0.1.0"
__all__ = ["USE_NUMBA", "MetricsReport", "ScenarioConfig", "load_scenario", "run_scenario"]
