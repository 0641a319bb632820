"""Scenario loading, deterministic execution and metric reporting."""

from .engine import Simulation, rng_stream, run
from .metrics import MetricsCollector, MetricsReport, report
from .scenario import Action, AgentSpec, Behavior, Scenario, ScenarioConfig, load_scenario
from .scenario import load_scenario_file

__all__ = [
    "Action", "AgentSpec", "Behavior", "MetricsCollector", "MetricsReport", "Scenario",
    "ScenarioConfig", "Simulation", "load_scenario", "load_scenario_file", "report",
    "rng_stream", "run",
]
