"""Behind-the-meter DER sizing, dispatch, and resilience planning engine."""

from .pipeline import results_json, run_scenario
from .scenario import Scenario, parse_scenario, validate_scenario

__version__ = "0.1.0"

__all__ = ["Scenario", "parse_scenario", "validate_scenario",
           "run_scenario", "results_json", "__version__"]
