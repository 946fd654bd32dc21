"""
Utility package for dnlab: scenario configuration and convergence tooling.
"""
from .config import ScenarioConfig, ScenarioLoader
from .performance import ConvergenceStudy, PerformanceTimer, fit_slope, observed_orders

__all__ = [
    "ScenarioConfig",
    "ScenarioLoader",
    "ConvergenceStudy",
    "PerformanceTimer",
    "fit_slope",
    "observed_orders",
]
