"""Simulator and schedulers for split (host + dataplane) PON upstream DBA."""

from .engine import ComparisonReport, SimReport, Simulator, compare, run
from .scenario import DelayModel, Mode, Scenario, load_config, scenario_from_config

__all__ = ["ComparisonReport", "DelayModel", "Mode", "Scenario", "SimReport", "Simulator",
           "compare", "load_config", "run", "scenario_from_config"]
__version__ = "0.1.0"
