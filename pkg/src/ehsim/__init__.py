"""Free-floating cubesat with scissor-boom hook systems: kinematics, dynamics, control and simulation."""
from .engine import run
from .errors import (
    CalibrationError,
    DomainError,
    EhsimError,
    ScenarioError,
    SimulationFault,
    SingularityError,
)
from .results import COLUMNS, RunSummary, Telemetry, compare_summary
from .scenario import Scenario, load_scenario

__all__ = [
    "COLUMNS",
    "CalibrationError",
    "DomainError",
    "EhsimError",
    "RunSummary",
    "Scenario",
    "ScenarioError",
    "SimulationFault",
    "SingularityError",
    "Telemetry",
    "compare_summary",
    "load_scenario",
    "run",
]
