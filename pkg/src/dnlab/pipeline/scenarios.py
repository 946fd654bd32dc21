"""
Builtin scenarios, small enough to run in seconds on one core.
"""
import copy
from typing import Any, Dict, List

from ..errors import ConfigError
from ..utils.config import ScenarioConfig

_GRID_1D = {"dim": 1, "extents": [1.0], "nx": [39], "nt": 80, "T": 1.0}

BUILTIN_SCENARIOS: Dict[str, Dict[str, Any]] = {
    "forward_zero": {
        "experiment": "forward",
        "grid": {"dim": 1, "extents": [1.0], "nx": [19], "nt": 40, "T": 1.0},
        "nonlinearity": {"name": "zero"},
        "options": {"lam": 0.0},
    },
    "forward_cubic": {
        "experiment": "forward",
        "grid": _GRID_1D,
        "nonlinearity": {"name": "cubic_absorbing", "params": {"c": 1.0}},
        "options": {"lam": 1.0, "perturbation_shape": "time_bump", "perturbation_amplitude": 0.05},
    },
    "forward_fnon_2d": {
        "experiment": "forward",
        "grid": {"dim": 2, "extents": [1.0, 1.0], "nx": [15, 15], "nt": 40, "T": 1.0},
        "nonlinearity": {"name": "power_law_fnon", "params": {"q": -1.0, "gamma": 3.0, "eps1": 1.0}},
        "options": {"lam": 2.0},
    },
    "linearize_cubic": {
        "experiment": "linearize",
        "grid": _GRID_1D,
        "nonlinearity": {"name": "cubic_absorbing"},
        "n_lambda": 11,
        "options": {"frechet_lambda": 0.5},
    },
    "constants_heat": {
        "experiment": "constants",
        "grid": _GRID_1D,
        "nonlinearity": {"name": "zero"},
        "options": {"q": 0.0, "kappa0_list": [0.0, 1.0, 10.0]},
    },
    "reconstruct_cubic": {
        "experiment": "reconstruct",
        "grid": _GRID_1D,
        "nonlinearity": {"name": "cubic_absorbing"},
        "n_lambda": 21,
    },
    "reconstruct_logistic": {
        "experiment": "reconstruct",
        "grid": _GRID_1D,
        "nonlinearity": {"name": "logistic", "params": {"rho": 1.0, "K": 4.0}},
        "n_lambda": 21,
        "r": 0.5,
    },
    "uniqueness_cubic": {
        "experiment": "uniqueness",
        "grid": {"dim": 1, "extents": [1.0], "nx": [19], "nt": 40, "T": 1.0},
        "nonlinearity": {"name": "cubic_absorbing"},
        "n_lambda": 5,
        "options": {"probe_count": 8, "bump": {"placement": "outside", "amplitude": 1.0}},
    },
    "stability_cubic": {
        "experiment": "stability",
        "grid": {"dim": 1, "extents": [1.0], "nx": [19], "nt": 40, "T": 1.0},
        "nonlinearity": {"name": "cubic_absorbing"},
        "n_lambda": 5,
        "options": {
            "probe_count": 8,
            "epsilon_list": [0.1, 0.05, 0.025, 0.0125],
            "perturbation": {"name": "cubic_absorbing", "params": {"c": {"profile": "bump"}}},
        },
    },
}


def list_scenarios() -> List[str]:
    return sorted(BUILTIN_SCENARIOS)


def get_scenario(name: str) -> ScenarioConfig:
    """Validated configuration of a builtin scenario."""
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"unknown scenario '{name}'; expected one of {list_scenarios()}", key="scenario")
    data = copy.deepcopy(BUILTIN_SCENARIOS[name])
    data["name"] = name
    return ScenarioConfig.from_dict(data).validate()
