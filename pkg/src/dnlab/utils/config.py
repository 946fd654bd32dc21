"""
Scenario configuration and settings management.
"""
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("forward", "linearize", "constants", "reconstruct", "uniqueness", "stability")
SCHEMES = ("implicit_euler", "crank_nicolson")
OUTPUT_ROOT_ENV = "DNLAB_OUTPUT_ROOT"


def _from_dict(cls, data: Optional[Dict[str, Any]], key: str):
    """Build a flat dataclass, rejecting unknown keys."""
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in '{key}': {unknown}", key=f"{key}.{unknown[0]}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid '{key}' section: {e}", key=key)


@dataclass
class GridConfig:
    """Discretization of (0,T) x Omega."""
    dim: int = 1
    extents: List[float] = field(default_factory=lambda: [1.0])
    nx: List[int] = field(default_factory=lambda: [49])
    nt: int = 100
    T: float = 1.0

    def __post_init__(self):
        # a bare number is accepted for the 1D case
        if not isinstance(self.extents, (list, tuple)):
            self.extents = [self.extents] * self.dim
        if not isinstance(self.nx, (list, tuple)):
            self.nx = [self.nx] * self.dim
        self.extents = [float(e) for e in self.extents]
        self.nx = [int(n) for n in self.nx]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridConfig":
        return _from_dict(cls, data, "grid")


@dataclass
class NonlinearityConfig:
    """A named builtin family with parameters, or a tabulated term."""
    name: str = "cubic_absorbing"
    params: Dict[str, Any] = field(default_factory=dict)
    table_path: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any], key: str = "nonlinearity") -> "NonlinearityConfig":
        return _from_dict(cls, data, key)


@dataclass
class ChiConfig:
    """Cutoff profile and perturbation ball."""
    delta1: float = 0.2
    delta2_initial: float = 1.0
    epsilon: float = 0.1
    perturbation_shapes: List[str] = field(
        default_factory=lambda: ["time_bump", "boundary_bump", "random_smooth"]
    )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChiConfig":
        return _from_dict(cls, data, "chi")


@dataclass
class ToleranceConfig:
    """Solver tolerances and invariant thresholds."""
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    blowup_cap: float = 1e6
    positivity_tol: float = 1e-10
    margin: float = 0.05
    compare_rtol: float = 1e-9
    compare_atol: float = 1e-12

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ToleranceConfig":
        return _from_dict(cls, data, "tolerances")


@dataclass
class ExperimentOptions:
    """Experiment-specific knobs; unused entries are ignored by other experiments."""
    lam: float = 1.0
    perturbation_shape: Optional[str] = None
    perturbation_amplitude: float = 0.0
    allow_blowup: bool = False
    q: float = 0.0
    kappa0: Optional[float] = None
    kappa0_list: List[float] = field(default_factory=lambda: [0.0, 1.0, 10.0])
    frechet_lambda: float = 0.5
    frechet_steps: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    probe_count: int = 8
    epsilon_list: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    perturbation: Dict[str, Any] = field(
        default_factory=lambda: {"name": "cubic_absorbing", "params": {"c": {"profile": "bump"}}}
    )
    bump: Dict[str, Any] = field(default_factory=lambda: {"placement": "outside", "amplitude": 1.0})
    truth_samples: int = 21

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentOptions":
        return _from_dict(cls, data, "options")


@dataclass
class ScenarioConfig:
    """Complete description of one experiment run."""
    name: str = "scenario"
    experiment: str = "forward"
    grid: GridConfig = field(default_factory=GridConfig)
    nonlinearity: NonlinearityConfig = field(default_factory=NonlinearityConfig)
    chi: ChiConfig = field(default_factory=ChiConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    options: ExperimentOptions = field(default_factory=ExperimentOptions)
    r: float = 1.0
    n_lambda: int = 21
    scheme: str = "implicit_euler"
    horizon: Optional[float] = None
    seed: int = 0
    output_dir: Optional[str] = None
    threads: int = 1
    alpha: float = 0.5

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """Create settings from dictionary."""
        data = dict(data)
        sections = {
            "grid": GridConfig.from_dict,
            "nonlinearity": NonlinearityConfig.from_dict,
            "chi": ChiConfig.from_dict,
            "tolerances": ToleranceConfig.from_dict,
            "options": ExperimentOptions.from_dict,
        }
        for key, build in sections.items():
            if key in data:
                data[key] = build(data[key])
        return _from_dict(cls, data, "scenario")

    @property
    def horizon_value(self) -> float:
        return self.grid.T if self.horizon is None else float(self.horizon)

    def validate(self) -> "ScenarioConfig":
        """Check the invariants of the schema; raises ConfigError on the first violation."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment '{self.experiment}'", key="experiment")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme '{self.scheme}'", key="scheme")
        if self.grid.dim not in (1, 2):
            raise ConfigError(f"grid.dim must be 1 or 2, got {self.grid.dim}", key="grid.dim")
        if self.grid.T <= 0:
            raise ConfigError("grid.T must be positive", key="grid.T")
        horizon = self.horizon_value
        if not 0 < horizon <= self.grid.T:
            raise ConfigError(f"horizon {horizon} must lie in (0, T={self.grid.T}]", key="horizon")
        if not 0 < self.chi.delta1 < horizon:
            raise ConfigError(
                f"chi.delta1={self.chi.delta1} must lie in (0, horizon={horizon})", key="chi.delta1"
            )
        if self.chi.delta2_initial <= 0:
            raise ConfigError("chi.delta2_initial must be positive", key="chi.delta2_initial")
        if not 0 < self.chi.epsilon < 1:
            raise ConfigError("chi.epsilon must lie in (0, 1)", key="chi.epsilon")
        for name in ("newton_tol", "blowup_cap", "positivity_tol", "compare_rtol", "compare_atol"):
            if getattr(self.tolerances, name) <= 0:
                raise ConfigError(f"tolerances.{name} must be positive", key=f"tolerances.{name}")
        if self.tolerances.newton_max_iter < 1:
            raise ConfigError("tolerances.newton_max_iter must be >= 1", key="tolerances.newton_max_iter")
        if not 0 <= self.tolerances.margin < 1:
            raise ConfigError("tolerances.margin must lie in [0, 1)", key="tolerances.margin")
        if self.r <= 0:
            raise ConfigError("r must be positive", key="r")
        if self.n_lambda < 5 or self.n_lambda % 2 == 0:
            raise ConfigError("n_lambda must be odd and >= 5", key="n_lambda")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", key="threads")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)", key="alpha")
        if self.options.probe_count < 1:
            raise ConfigError("options.probe_count must be >= 1", key="options.probe_count")
        if self.experiment == "stability" and self.options.probe_count < 8:
            raise ConfigError("stability runs need options.probe_count >= 8", key="options.probe_count")
        return self

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form; output_dir and threads do not affect results."""
        data = self.to_dict()
        data.pop("output_dir", None)
        data.pop("threads", None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


class ScenarioLoader:
    """Loads, validates and saves scenario files."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the loader.

        Args:
            config_path: Path to a JSON scenario file
        """
        self.config_path = Path(config_path) if config_path else None
        self.config: Optional[ScenarioConfig] = None

    def load(self) -> ScenarioConfig:
        """Load and validate the scenario file."""
        if self.config_path is None or not self.config_path.exists():
            raise ConfigError(f"scenario file not found: {self.config_path}", key="config")
        try:
            with open(self.config_path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"scenario file is not valid JSON: {e}", key="config")
        if not isinstance(data, dict):
            raise ConfigError("scenario file must contain a JSON object", key="config")
        self.config = ScenarioConfig.from_dict(data).validate()
        logger.info(f"Loaded scenario '{self.config.name}' ({self.config.experiment}) from {self.config_path}")
        return self.config

    def save(self, config: ScenarioConfig, path: Optional[str] = None) -> Path:
        """Save a scenario to JSON."""
        target = Path(path) if path else self.config_path
        if target is None:
            raise ConfigError("no path to save the scenario to", key="config")
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w") as f:
            json.dump(config.to_dict(), f, indent=2, sort_keys=True)
        self.config_path = target
        return target


def default_output_root() -> Path:
    """Output root from the environment, falling back to ./runs."""
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
