"""Co-simulation: scenarios, the lockstep engine, the built-in catalog and sweeps."""

from .catalog import (
    SweepPoint,
    apply_value,
    catalog_scenario,
    critical_gain,
    failure_threshold,
    is_monotone,
    scenario_catalog,
    sweep,
)
from .engine import OUTCOMES, Engine, ScenarioResult, run
from .scenario import GridCodeConfig, OutputOptions, Scenario, load_scenario, scenario_from_dict
