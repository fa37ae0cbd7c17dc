"""Monte Carlo power analysis for classical hypothesis tests.

Typical use::

    from powersim import scenarios, engine
    est = engine.estimate_power(scenarios.get("t-one-sample"), n=30, reps=5000, seed=1)
"""

from . import engine, linmod, oracle, probkit, scenarios, testkit
from .engine import PowerEstimate, SolveResult, WidthEstimate, estimate_power, estimate_size, power_curve, solve_sample_size
from .exceptions import ConfigError, DesignError, NumericError, ParameterError, PowerSimError, SimulationError
from .probkit import RandomSource
from .scenarios import Scenario, catalog
from .testkit import TestResult

__version__ = "0.1.0"

__all__ = [
    "engine", "linmod", "oracle", "probkit", "scenarios", "testkit",
    "PowerEstimate", "SolveResult", "WidthEstimate",
    "estimate_power", "estimate_size", "power_curve", "solve_sample_size",
    "ConfigError", "DesignError", "NumericError", "ParameterError", "PowerSimError", "SimulationError",
    "RandomSource", "Scenario", "catalog", "TestResult",
]
