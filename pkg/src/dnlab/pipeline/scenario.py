"""
Scenario runner: stages one experiment, funnels its outputs through a single
ArtifactWriter and always leaves a manifest behind.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .. import __version__
from ..discretization.boundary import BoundaryProfile, build_chi, make_perturbation
from ..discretization.grid import SpaceTimeGrid, build_grid
from ..errors import ConfigError, DnlabError, GridError, InvariantViolation, PerturbationTooLarge, SolverError
from ..inverse.dnmap import DNTrace, check_dn_frechet
from ..inverse.linearize import (
    build_bundle,
    check_frechet_lambda,
    check_frechet_s,
    export_bundle,
    integral_identity_check,
)
from ..inverse.reachable import compute_constants, invert_lambda
from ..inverse.reconstruct import (
    PotentialData,
    bump_variant,
    compare_to_truth,
    export_reconstruction,
    potential_bound,
    reconstruct,
    uniqueness_probe,
)
from ..inverse.stability import run_stability
from ..nonlinearity.hypotheses import check_all, estimate_kappa0
from ..nonlinearity.terms import SemilinearTerm, TabulatedTerm, builtin_family
from ..solver.semilinear import SemilinearProblem, SolverSettings, solve_semilinear
from ..utils.config import NonlinearityConfig, ScenarioConfig, default_output_root
from ..utils.performance import PerformanceTimer, compare_studies
from .artifacts import ArtifactWriter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

MANIFEST_NAME = "manifest.json"
ERROR_NAME = "error.json"


class ExperimentStage(Enum):
    """Stages of a scenario run."""
    SETUP = "setup"
    HYPOTHESES = "hypotheses"
    COMPUTE = "compute"
    EXPORT = "export"


@dataclass
class StageState:
    """State of one stage."""
    stage: ExperimentStage
    status: str  # "pending", "running", "completed", "failed"
    elapsed: float = 0.0
    error: Optional[str] = None
    timestamp: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "stage": self.stage.value,
            "status": self.status,
            "elapsed": self.elapsed,
            "error": self.error,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "StageState":
        data = dict(data)
        data["stage"] = ExperimentStage(data["stage"])
        return cls(**data)


@dataclass
class RunManifest:
    """Provenance of one run: config hash, code version, stages and emitted files."""
    scenario: str
    experiment: str
    config_hash: str
    seed: int
    version: str = __version__
    started_at: float = 0.0
    finished_at: float = 0.0
    status: str = "pending"
    exit_code: int = EXIT_OK
    stages: List[StageState] = field(default_factory=list)
    files: List[Dict[str, Any]] = field(default_factory=list)
    error: Optional[Dict[str, Any]] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "scenario": self.scenario,
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "exit_code": self.exit_code,
            "stages": [s.to_dict() for s in self.stages],
            "files": self.files,
            "error": self.error,
            "timings": self.timings,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "RunManifest":
        data = dict(data)
        data["stages"] = [StageState.from_dict(s) for s in data.get("stages", [])]
        return cls(**data)


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit status."""
    if isinstance(error, (ConfigError, GridError, PerturbationTooLarge)):
        return EXIT_CONFIG
    if isinstance(error, SolverError):
        return EXIT_SOLVER
    if isinstance(error, DnlabError):
        return EXIT_INVARIANT
    return EXIT_UNEXPECTED


def error_payload(error: BaseException) -> Dict[str, Any]:
    if isinstance(error, DnlabError):
        return error.to_dict()
    return {"error": type(error).__name__, "message": str(error)}


def make_term(config: NonlinearityConfig) -> SemilinearTerm:
    """Builtin family or tabulated term; bad names and parameters are config errors."""
    try:
        if config.table_path:
            return TabulatedTerm.from_npz(config.table_path).as_term(config.name)
        return builtin_family(config.name, config.params)
    except (ValueError, KeyError, OSError) as e:
        raise ConfigError(f"cannot build nonlinearity '{config.name}': {e}", key="nonlinearity")


class ScenarioRunner:
    """
    Runs one scenario.

    Stages report into the manifest as they go; the manifest and, on failure,
    a machine-readable error JSON are written whatever happens.
    """

    def __init__(self, config: ScenarioConfig, output_dir: Optional[str] = None):
        """
        Initialize the runner.

        Args:
            config: Validated scenario configuration
            output_dir: Overrides config.output_dir and the default output root
        """
        self.config = config
        target = output_dir or config.output_dir or default_output_root() / config.name
        self.writer = ArtifactWriter(target)
        self.manifest = RunManifest(config.name, config.experiment, config.config_hash(), config.seed)
        self.settings = SolverSettings.from_tolerances(config.tolerances)
        self.summary: Dict[str, Any] = {}
        self.grid: Optional[SpaceTimeGrid] = None
        self.chi: Optional[BoundaryProfile] = None
        self.F: Optional[SemilinearTerm] = None

    @property
    def output_dir(self) -> Path:
        return self.writer.output_dir

    def _stage(self, stage: ExperimentStage, action: Callable[[], None]) -> None:
        state = StageState(stage, "running", timestamp=time.time())
        self.manifest.stages.append(state)
        logger.info(f"[{self.config.name}] stage {stage.value}")
        timer = PerformanceTimer()
        timer.start()
        try:
            action()
        except BaseException as e:
            state.status = "failed"
            state.error = str(e)
            raise
        finally:
            state.elapsed = timer.stop()
        state.status = "completed"

    def run(self) -> Tuple[int, RunManifest]:
        """Execute the experiment; returns (exit code, manifest)."""
        self.manifest.started_at = time.time()
        experiment = getattr(self, f"_run_{self.config.experiment}")
        try:
            self._stage(ExperimentStage.SETUP, self._setup)
            self._stage(ExperimentStage.HYPOTHESES, self._hypotheses)
            self._stage(ExperimentStage.COMPUTE, experiment)
            self._stage(ExperimentStage.EXPORT, self._export_summary)
            self.manifest.status = "completed"
            self.manifest.exit_code = EXIT_OK
        except Exception as e:
            code = exit_code_for(e)
            if code == EXIT_UNEXPECTED:
                logger.exception(f"Unexpected failure in scenario {self.config.name}")
            else:
                logger.error(f"Scenario {self.config.name} failed ({type(e).__name__}): {e}")
            self.manifest.status = "failed"
            self.manifest.exit_code = code
            self.manifest.error = error_payload(e)
            self.writer.write_json(ERROR_NAME, dict(self.manifest.error, exit_code=code))
        finally:
            self._write_manifest()
        return self.manifest.exit_code, self.manifest

    def _write_manifest(self) -> None:
        self.manifest.finished_at = time.time()
        manifest_path = self.writer.path(MANIFEST_NAME)
        self.manifest.files = self.writer.files(exclude=[manifest_path])
        self.writer.write_json(MANIFEST_NAME, self.manifest.to_dict())
        logger.info(f"Wrote manifest with {len(self.manifest.files)} files to {manifest_path}")

    # -- stages -------------------------------------------------------------

    def _setup(self) -> None:
        config = self.config
        full = build_grid(config.grid)
        try:
            chi = build_chi(full, config.chi.delta1, config.chi.delta2_initial, config.chi.epsilon,
                            horizon=config.horizon_value)
        except ValueError as e:
            raise ConfigError(str(e), key="chi")
        self.full_grid = full
        self.full_chi = chi
        self.grid = full.truncate(config.horizon)
        self.chi = chi.on(self.grid)
        self.F = make_term(config.nonlinearity)
        self.writer.write_json("scenario.json", config.to_dict())
        logger.info(f"Grid {self.grid.describe()}, chi plateau {self.chi.delta2:.6g}")

    def _u_max(self, lam: Optional[float] = None) -> float:
        scale = self.config.r if lam is None else abs(lam)
        return max(1.0, scale * self.chi.delta2)

    def _hypotheses(self) -> None:
        lam = self.config.options.lam if self.config.experiment == "forward" else None
        report = check_all(self.F, self.grid, self._u_max(lam))
        self.writer.write_json("hypotheses.json", report.to_dict())
        if self.config.experiment in ("linearize", "reconstruct", "uniqueness"):
            report.require("t1a")

    def _export_summary(self) -> None:
        self.summary["scenario"] = self.config.name
        self.summary["experiment"] = self.config.experiment
        self.writer.write_json("summary.json", self.summary)

    # -- experiments --------------------------------------------------------

    def _run_forward(self) -> None:
        config, grid, chi = self.config, self.grid, self.chi
        options = config.options
        data = options.lam * chi.values
        if options.perturbation_shape:
            h = make_perturbation(grid, options.perturbation_shape, options.perturbation_amplitude,
                                  chi.epsilon, seed=config.seed)
            data = data + h.values
        u, report = solve_semilinear(SemilinearProblem(grid, self.F, data), config.scheme, self.settings,
                                     raise_on_failure=not options.allow_blowup)
        self.writer.write_field("solution", u)
        self.writer.write_boundary("dirichlet", u, data)
        if u.is_finite():
            self.writer.write_boundary("dn_trace", u, DNTrace.from_field(u).values)
        self.writer.write_json("solve_report.json", report.to_dict())
        self.summary.update({"lambda": options.lam, "sup_norm": report.sup_norm,
                             "blowup": report.blowup_flag, "newton_iterations": report.total_iterations})

    def _bundle(self):
        config = self.config
        return build_bundle(self.F, self.chi, config.r, config.n_lambda, scheme=config.scheme,
                            settings=self.settings, threads=config.threads)

    def _run_linearize(self) -> None:
        config, chi = self.config, self.chi
        options = config.options
        bundle = self._bundle()
        for path in export_bundle(bundle, self.writer.path("bundle")):
            self.writer.register(path)
        h = make_perturbation(self.grid, config.chi.perturbation_shapes[0], chi.epsilon, chi.epsilon,
                              seed=config.seed)
        checks = [
            check_frechet_s(self.F, chi, options.frechet_lambda, h, options.frechet_steps, config.scheme, self.settings),
            check_frechet_lambda(bundle, options.frechet_lambda, options.frechet_steps),
            check_dn_frechet(self.F, chi, options.frechet_lambda, h, options.frechet_steps, config.scheme,
                             self.settings),
        ]
        study_files = [path for path in (c.as_study().save(self.writer.path("studies")) for c in checks) if path]
        for path in study_files:
            self.writer.register(path)
        self.summary.update({
            "integral_identity_max_relative_error": integral_identity_check(bundle),
            "attained_range": list(bundle.attained_range()),
            "derivative_checks": [c.to_dict() for c in checks],
            "derivative_slopes": compare_studies(study_files),
        })

    def _run_constants(self) -> None:
        config = self.config
        options = config.options
        tol = config.tolerances.positivity_tol
        rows, details = [], []
        for k, kappa0 in enumerate(options.kappa0_list):
            constants = compute_constants(options.q, kappa0, self.full_chi, self.full_grid, config.chi.delta1,
                                          horizon=config.horizon, threads=config.threads)
            if constants.a1 <= tol or constants.a2 <= tol:
                raise InvariantViolation(
                    f"non-positive reachable constant at kappa0={kappa0}", witness=constants.to_dict()
                )
            if kappa0 >= options.q and constants.a2 > constants.a1 + tol:
                raise InvariantViolation(
                    f"a2 > a1 although kappa0={kappa0} >= q={options.q}", witness=constants.to_dict()
                )
            if k == 0:
                self.writer.write_field("w", constants.w, binary=False)
            self.writer.write_field(f"y_{k:03d}", constants.y, binary=False)
            full = np.nan if constants.a1_full_horizon is None else constants.a1_full_horizon
            rows.append([kappa0, constants.a1, constants.a2, full])
            details.append(constants.to_dict())
        self.writer.write_table("constants.csv", ["kappa0", "a1", "a2", "a1_full_horizon"], np.array(rows))
        self.summary["constants"] = details

    def _kappa0(self) -> float:
        options_kappa0 = self.config.options.kappa0
        if options_kappa0 is not None:
            return float(options_kappa0)
        if self.F.metadata.kappa0 is not None:
            return float(self.F.metadata.kappa0)
        return estimate_kappa0(self.F, self.grid)

    def _run_reconstruct(self) -> None:
        config = self.config
        bundle = self._bundle()
        data = PotentialData.from_bundle(bundle)
        kappa0 = max(self._kappa0(), potential_bound(data))
        constants = compute_constants(0.0, kappa0, self.chi, self.grid, threads=config.threads)
        rec = reconstruct(data, self.chi, config.r, kappa0,
                          config.tolerances.margin, config.threads, constants)
        comparison = compare_to_truth(rec, self.F, config.options.truth_samples)
        for path in export_reconstruction(rec, self.writer.path("reconstruction"), comparison):
            self.writer.register(path)
        direct = bundle.stack("v")[:, rec.levels]
        scale = max(float(np.max(np.abs(direct))), 1e-300)
        worst = constants.a2_argmin
        inversion = invert_lambda(bundle, worst.t, worst.x, rec.half_width)
        self.summary.update({
            "kappa0": kappa0,
            "sup_error": comparison.sup_error,
            "l2_error": comparison.l2_error,
            "valid_box": rec.valid_box,
            "route_gap": float(np.max(np.abs(rec.s - direct))) / scale,
            "inversion_at_worst_point": inversion.to_dict(),
        })
        if self.F.metadata.odd:
            s = np.linspace(0.0, rec.half_width, 5)
            gap = np.max(np.abs(rec.node_values(s) + rec.node_values(-s)))
            self.summary["oddness_gap"] = float(gap)

    def _run_uniqueness(self) -> None:
        config = self.config
        options = config.options
        kwargs = dict(n_lambda=config.n_lambda, probe_count=options.probe_count, seed=config.seed,
                      scheme=config.scheme, settings=self.settings, threads=config.threads)
        baseline = uniqueness_probe(self.F, self.F, self.chi, config.r, **kwargs)
        placement = str(options.bump.get("placement", "outside"))
        if placement not in ("inside", "outside"):
            raise ConfigError(f"bump placement must be 'inside' or 'outside', got '{placement}'",
                              key="options.bump.placement")
        F2 = bump_variant(self.F, baseline.attained_range, placement == "inside",
                          float(options.bump.get("amplitude", 1.0)))
        report = uniqueness_probe(self.F, F2, self.chi, config.r, **kwargs)
        self.writer.write_json("uniqueness.json", {"baseline": baseline.to_dict(), "variant": report.to_dict(),
                                                   "placement": placement})
        self.summary.update({"placement": placement, "verdict": report.verdict,
                             "max_trace_difference": report.max_trace_difference})
        if placement == "outside" and report.verdict != "indistinguishable":
            raise InvariantViolation(
                "terms agreeing on the attained range produced different traces", witness=report.to_dict()
            )

    def _run_stability(self) -> None:
        config = self.config
        options = config.options
        perturbation = make_term(NonlinearityConfig.from_dict(options.perturbation, key="options.perturbation"))
        run = run_stability(
            self.F, perturbation, options.epsilon_list, self.chi, config.r, seed=config.seed,
            n_lambda=config.n_lambda, probe_count=options.probe_count, kappa0=self._kappa0(),
            margin=config.tolerances.margin, scheme=config.scheme, settings=self.settings,
            threads=config.threads, scenario=config.name,
        )
        self.writer.write_json("stability.json", run.to_dict())
        self.writer.register(run.write_csv(self.writer.path("stability.csv")))
        long_path = run.write_long_csv(self.writer.path("stability_long.csv"))
        if long_path is not None:
            self.writer.register(long_path)
        self.manifest.timings.update({f"stability.eps={eps}": seconds for eps, seconds in run.runtimes().items()})
        self.summary.update({"spearman_rho": run.spearman_rho, "fit_slope": run.fit_slope})


def record_config_failure(error: ConfigError, output_dir: Union[str, Path], scenario: str = "unknown") -> RunManifest:
    """error.json and a failed manifest for a scenario that never got a validated config."""
    writer = ArtifactWriter(output_dir)
    now = time.time()
    manifest = RunManifest(scenario, "unknown", "", 0, started_at=now, finished_at=now, status="failed",
                           exit_code=EXIT_CONFIG, error=error_payload(error))
    manifest.stages.append(StageState(ExperimentStage.SETUP, "failed", error=str(error), timestamp=now))
    writer.write_json(ERROR_NAME, dict(manifest.error, exit_code=EXIT_CONFIG))
    manifest.files = writer.files(exclude=[writer.path(MANIFEST_NAME)])
    writer.write_json(MANIFEST_NAME, manifest.to_dict())
    logger.info(f"Wrote failed manifest for {scenario} to {writer.path(MANIFEST_NAME)}")
    return manifest


def run_scenario(config: ScenarioConfig, output_dir: Optional[str] = None) -> Tuple[int, RunManifest]:
    """Run a validated scenario and return (exit code, manifest)."""
    return ScenarioRunner(config, output_dir).run()
