"""
Pipeline package: scenario orchestration, artifact writing and golden verification.
"""
from .artifacts import ArtifactWriter
from .scenario import (
    EXIT_CONFIG,
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_UNEXPECTED,
    ExperimentStage,
    RunManifest,
    ScenarioRunner,
    StageState,
    run_scenario,
)
from .scenarios import get_scenario, list_scenarios
from .verify import VerifyReport, verify

__all__ = [
    "ArtifactWriter",
    "EXIT_CONFIG",
    "EXIT_INVARIANT",
    "EXIT_OK",
    "EXIT_SOLVER",
    "EXIT_UNEXPECTED",
    "ExperimentStage",
    "RunManifest",
    "ScenarioRunner",
    "StageState",
    "run_scenario",
    "get_scenario",
    "list_scenarios",
    "VerifyReport",
    "verify",
]
