"""
Empirical harness for the log-type stability estimate: sup-norm gaps of
F1 and F1 + eps * P on the valid box against DN-difference estimates.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.stats import spearmanr

from ..discretization.boundary import BoundaryProfile, random_probes
from ..discretization.serialization import write_table
from ..errors import InvariantViolation
from ..nonlinearity.hypotheses import check_t1a, check_t1b
from ..nonlinearity.terms import SemilinearTerm
from ..solver.semilinear import SemilinearProblem, SolverSettings, solve_semilinear
from ..solver.stepping import Scheme
from ..utils.performance import PerformanceTimer
from .dnmap import NORM_KIND, discrepancy_from_potentials
from .linearize import potential_field, symmetric_lambda_grid
from .reachable import compute_constants

logger = logging.getLogger(__name__)

try:
    import pandas as pd
    PANDAS_AVAILABLE = True
except ImportError:
    PANDAS_AVAILABLE = False
    logger.warning("pandas not available, long-format stability CSV disabled")

TREND_THRESHOLD = 0.9


@dataclass
class StabilityRecord:
    epsilon: float
    sup_F_diff: float
    dn_discrepancy: float
    per_lambda: List[float]
    runtime: float
    lambdas: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Every field except the wall-clock runtime."""
        data = asdict(self)
        del data["runtime"]
        return data


@dataclass
class StabilityRun:
    """Per-epsilon records, sorted by epsilon, with the fitted log-type decay."""
    scenario: str
    seed: int
    records: List[StabilityRecord] = field(default_factory=list)
    half_width: float = 0.0
    spearman_rho: float = float("nan")
    fit_slope: float = float("nan")
    fit_intercept: float = float("nan")
    norm_kind: str = NORM_KIND

    @property
    def theta(self) -> float:
        """Decay exponent of sup_F_diff <= C (log(3 + 1/dn))^(-theta)."""
        return -self.fit_slope

    @property
    def constant(self) -> float:
        return float(np.exp(self.fit_intercept))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "half_width": self.half_width,
            "norm_kind": self.norm_kind,
            "spearman_rho": self.spearman_rho,
            "fit": {"slope": self.fit_slope, "intercept": self.fit_intercept,
                    "theta": self.theta, "constant": self.constant},
            "records": [r.to_dict() for r in self.records],
        }

    def runtimes(self) -> Dict[str, float]:
        """Wall-clock seconds per epsilon, keyed by repr of epsilon."""
        return {repr(r.epsilon): r.runtime for r in self.records}

    def write_csv(self, path: Union[str, Path]) -> Path:
        """One row per epsilon."""
        rows = np.array([[r.epsilon, r.sup_F_diff, r.dn_discrepancy,
                          self.spearman_rho, self.fit_slope, self.fit_intercept] for r in self.records])
        columns = ["epsilon", "sup_F_diff", "dn_discrepancy", "spearman_rho", "fit_slope", "fit_intercept"]
        return write_table(path, columns, rows.reshape(len(self.records), len(columns)))

    def write_long_csv(self, path: Union[str, Path]) -> Optional[Path]:
        """Plot-ready rows (epsilon, lambda, metric, value); None without pandas."""
        if not PANDAS_AVAILABLE:
            logger.warning("Skipping long-format CSV: pandas not installed")
            return None
        rows = []
        for r in self.records:
            rows.append({"epsilon": r.epsilon, "lambda": np.nan, "metric": "sup_F_diff", "value": r.sup_F_diff})
            rows.append({"epsilon": r.epsilon, "lambda": np.nan, "metric": "dn_discrepancy",
                         "value": r.dn_discrepancy})
            for lam, value in zip(r.lambdas, r.per_lambda):
                rows.append({"epsilon": r.epsilon, "lambda": lam, "metric": "dn_discrepancy_lambda", "value": value})
        path = Path(path)
        pd.DataFrame(rows, columns=["epsilon", "lambda", "metric", "value"]).to_csv(
            path, index=False, float_format="%.17g")
        return path


def sup_difference_on_box(F1: SemilinearTerm, F2: SemilinearTerm, chi: BoundaryProfile, half_width: float,
                          s_samples: int = 21) -> float:
    """Max |F1 - F2| over the window nodes and an s-lattice of [-half_width, half_width]."""
    grid = chi.grid
    levels = grid.window_levels(chi.delta1)
    pad = (1,) * grid.dim
    t = grid.times[levels].reshape((-1,) + pad + (1,))
    x = tuple(c[None, ..., None] for c in grid.coords)
    s = np.linspace(-half_width, half_width, s_samples).reshape((1,) + pad + (-1,))
    gap = np.asarray(F1.f(t, x, s), dtype=float) - np.asarray(F2.f(t, x, s), dtype=float)
    return float(np.max(np.abs(gap)))


def _fit_log_type(records: Sequence[StabilityRecord]):
    usable = [r for r in records if r.sup_F_diff > 0 and r.dn_discrepancy > 0]
    if len(usable) < 2:
        return float("nan"), float("nan")
    x = np.log(np.log(3.0 + 1.0 / np.array([r.dn_discrepancy for r in usable])))
    y = np.log(np.array([r.sup_F_diff for r in usable]))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def run_stability(F1: SemilinearTerm, perturbation: SemilinearTerm, epsilon_list: Sequence[float],
                  chi: BoundaryProfile, r: float, seed: int = 0, n_lambda: int = 5, probe_count: int = 8,
                  kappa0: float = 0.0, margin: float = 0.05,
                  scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                  settings: Optional[SolverSettings] = None, threads: int = 1,
                  scenario: str = "stability", assert_trend: bool = True) -> StabilityRun:
    """
    Sweep F2 = F1 + eps * perturbation over epsilon_list.

    Args:
        F1: Base nonlinearity
        perturbation: Direction P of the family
        epsilon_list: Non-negative perturbation scales
        chi: Cutoff profile
        r: Excitation radius
        seed: Probe seed, shared by every epsilon
        n_lambda: Size of the symmetric lambda grid
        probe_count: Probes per lambda
        kappa0: kappa(0) defining a2 and the valid box
        margin: Relative shrinkage of the valid box
        threads: Worker threads across epsilons
        assert_trend: Raise when the Spearman correlation is below 0.9

    Returns:
        The StabilityRun

    Raises:
        HypothesisViolation: some F2 fails (t1a) or (t1b)
        InvariantViolation: the co-monotone trend does not hold
    """
    if any(e < 0 for e in epsilon_list):
        raise ValueError(f"epsilon_list must be non-negative, got {list(epsilon_list)}")
    settings = settings or SolverSettings()
    grid = chi.grid
    u_max = max(r * chi.delta2, 1e-6)
    epsilons = sorted(float(e) for e in epsilon_list)
    families = {}
    for eps in epsilons:
        F2 = F1.plus(perturbation, eps)
        report = check_t1a(F2, grid).merge(check_t1b(F2, grid, u_max))
        report.require("t1a", "t1b")
        families[eps] = F2
    constants = compute_constants(0.0, kappa0, chi, grid, chi.delta1)
    half_width = constants.a2 * r * (1.0 - margin)
    lambdas = symmetric_lambda_grid(r, n_lambda)
    probes = random_probes(grid, probe_count, chi.epsilon, seed)

    base_potentials = {}
    for lam in lambdas:
        u, _ = solve_semilinear(SemilinearProblem(grid, F1, lam * chi.values), scheme, settings)
        base_potentials[float(lam)] = potential_field(F1, u, 1)

    def evaluate(eps: float) -> StabilityRecord:
        F2 = families[eps]
        with PerformanceTimer() as timer:
            sup_diff = sup_difference_on_box(F1, F2, chi, half_width)
            per_lambda = []
            for lam in lambdas:
                u, _ = solve_semilinear(SemilinearProblem(grid, F2, lam * chi.values), scheme, settings)
                V2 = potential_field(F2, u, 1)
                estimate = discrepancy_from_potentials(base_potentials[float(lam)], V2, probes, lam=float(lam))
                per_lambda.append(estimate.value)
        record = StabilityRecord(eps, sup_diff, max(per_lambda), per_lambda, timer.elapsed_time(), lambdas.tolist())
        logger.info(f"eps={eps:g}: sup|F1-F2|={sup_diff:.3e}, DN discrepancy={record.dn_discrepancy:.3e}")
        return record

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            records = list(executor.map(evaluate, epsilons))
    else:
        records = [evaluate(eps) for eps in epsilons]

    run = StabilityRun(scenario=scenario, seed=seed, records=records, half_width=float(half_width))
    for rec in records:
        if not (np.isfinite(rec.sup_F_diff) and np.isfinite(rec.dn_discrepancy)):
            raise InvariantViolation("non-finite stability record", witness=rec.to_dict())
    informative = [rec for rec in records if rec.epsilon > 0]
    if len(informative) >= 3:
        rho, _ = spearmanr([rec.sup_F_diff for rec in informative], [rec.dn_discrepancy for rec in informative])
        run.spearman_rho = float(rho)
    run.fit_slope, run.fit_intercept = _fit_log_type(records)
    logger.info(f"Stability run {scenario}: Spearman rho={run.spearman_rho:.3f}, fitted slope={run.fit_slope:.3f}")
    if assert_trend and len(informative) >= 3 and not run.spearman_rho >= TREND_THRESHOLD:
        raise InvariantViolation(
            f"sup_F_diff and DN discrepancy are not co-monotone (Spearman rho={run.spearman_rho:.3f})",
            witness={"spearman_rho": run.spearman_rho, "records": [rec.to_dict() for rec in records]},
        )
    return run
