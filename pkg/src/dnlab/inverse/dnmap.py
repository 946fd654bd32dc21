"""
Dirichlet-to-Neumann traces of the nonlinear problem and of its linearization.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..discretization.boundary import BoundaryProfile, Perturbation, random_probes
from ..discretization.grid import Field, SpaceTimeGrid
from ..errors import PerturbationTooLarge
from ..nonlinearity.terms import SemilinearTerm
from ..solver.linear import LinearProblem, solve_linear
from ..solver.semilinear import SemilinearProblem, SolverSettings, solve_semilinear
from ..solver.stepping import Scheme
from .linearize import DerivativeCheckReport, potential_field, validate_steps

logger = logging.getLogger(__name__)

NORM_KIND = "L2((0,T1) x boundary) -> L2((0,T1) x boundary), randomized probing"


@dataclass(frozen=True, eq=False)
class DNTrace:
    """Outward normal derivative on the lateral boundary, shape (n_levels, n_boundary)."""
    grid: SpaceTimeGrid
    values: np.ndarray

    @classmethod
    def from_field(cls, f: Field) -> "DNTrace":
        return cls(f.grid, f.grid.normal_trace(f.values))

    def l2_norm(self) -> float:
        return self.grid.boundary_l2(self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[1:]), initial=0.0))

    def __sub__(self, other: "DNTrace") -> "DNTrace":
        return DNTrace(self.grid, self.values - other.values)


def _boundary_values(h: Union[Perturbation, np.ndarray, None], grid: SpaceTimeGrid) -> np.ndarray:
    if h is None:
        return np.zeros((grid.n_levels, grid.n_boundary))
    values = h.values if isinstance(h, Perturbation) else np.asarray(h, dtype=float)
    return values[: grid.n_levels]


def nonlinear_dn(F: SemilinearTerm, chi: BoundaryProfile, lam: float, h: Optional[Perturbation] = None,
                 scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                 settings: Optional[SolverSettings] = None) -> DNTrace:
    """
    Trace of the solution with boundary data lam * chi + h.

    Raises:
        PerturbationTooLarge: h lies outside its ball B_epsilon
        SolverError: the forward solve failed
    """
    if h is not None and h.norm_surrogate > h.epsilon * (1 + 1e-12):
        raise PerturbationTooLarge(h.norm_surrogate, h.epsilon)
    grid = chi.grid
    data = lam * chi.values + _boundary_values(h, grid)
    u, _ = solve_semilinear(SemilinearProblem(grid, F, data), scheme, settings)
    return DNTrace.from_field(u)


def linearized_dn(V: Field, h: Union[Perturbation, np.ndarray, None],
                  scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER) -> DNTrace:
    """Trace of the linear solution with potential V and boundary h."""
    grid = V.grid
    u = solve_linear(LinearProblem(grid, potential=V, dirichlet=_boundary_values(h, grid)), scheme)
    return DNTrace.from_field(u)


@dataclass
class DiscrepancyEstimate:
    """Running-max estimate of the norm of a DN-map difference."""
    value: float = 0.0
    probes_used: int = 0
    norm_kind: str = NORM_KIND
    history: List[float] = field(default_factory=list)
    lam: Optional[float] = None

    def update(self, ratio: float) -> None:
        self.value = max(self.value, float(ratio))
        self.probes_used += 1
        self.history.append(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "probes_used": self.probes_used, "norm_kind": self.norm_kind,
                "history": self.history, "lambda": self.lam}


def discrepancy_from_potentials(V1: Field, V2: Field, probes: Sequence[Perturbation],
                                threads: int = 1, lam: Optional[float] = None) -> DiscrepancyEstimate:
    """
    Max over probes of ||Lambda_V1 h - Lambda_V2 h||_2 / ||h||_2.

    Probes are evaluated concurrently; the running max is reduced in probe order.
    """
    grid = V1.grid

    def ratio(h: Perturbation) -> float:
        norm = grid.boundary_l2(h.values[: grid.n_levels])
        if norm == 0.0:
            return 0.0
        if V1 is V2:
            return 0.0
        diff = linearized_dn(V1, h) - linearized_dn(V2, h)
        return diff.l2_norm() / norm

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            ratios = list(executor.map(ratio, probes))
    else:
        ratios = [ratio(h) for h in probes]
    estimate = DiscrepancyEstimate(lam=lam)
    for k, value in enumerate(ratios):
        estimate.update(value)
        logger.debug(f"Probe {k}: ratio {value:.6e}, running max {estimate.value:.6e}")
    return estimate


def estimate_discrepancy(F1: SemilinearTerm, F2: SemilinearTerm, lam: float, probe_count: int, seed: int,
                         chi: BoundaryProfile, epsilon: Optional[float] = None,
                         scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                         settings: Optional[SolverSettings] = None,
                         threads: int = 1) -> DiscrepancyEstimate:
    """
    Estimate the norm of Lambda_{V1,lam} - Lambda_{V2,lam} by seeded random probing.

    Args:
        F1: First nonlinearity
        F2: Second nonlinearity
        lam: Excitation parameter
        probe_count: Number of probes, at least 8
        seed: Probe seed; probe k uses the seed pair (seed, k)
        chi: Cutoff profile
        epsilon: Probe norm (defaults to chi.epsilon)

    Returns:
        The DiscrepancyEstimate
    """
    if probe_count < 8:
        raise ValueError(f"probe_count must be >= 8, got {probe_count}")
    grid = chi.grid
    eps = chi.epsilon if epsilon is None else epsilon
    potentials = []
    for F in (F1, F2):
        u, _ = solve_semilinear(SemilinearProblem(grid, F, lam * chi.values), scheme, settings)
        potentials.append(potential_field(F, u, 1))
    probes = random_probes(grid, probe_count, eps, seed)
    estimate = discrepancy_from_potentials(potentials[0], potentials[1], probes, threads, lam)
    logger.info(f"DN discrepancy {F1.name} vs {F2.name} at lambda={lam:g}: {estimate.value:.6e}")
    return estimate


def check_dn_frechet(F: SemilinearTerm, chi: BoundaryProfile, lam: float, h: Perturbation,
                     steps: Sequence[float], scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                     settings: Optional[SolverSettings] = None) -> DerivativeCheckReport:
    """
    ||N(s h) - N(0) - s Lambda_V h||_2 over s; the fitted slope should be close to 2.
    """
    steps = validate_steps(steps)
    grid = chi.grid
    scheme = Scheme(scheme)
    base = lam * chi.values
    hv = _boundary_values(h, grid)
    u0, _ = solve_semilinear(SemilinearProblem(grid, F, base), scheme, settings)
    trace0 = DNTrace.from_field(u0)
    linear = linearized_dn(potential_field(F, u0, 1), hv, scheme)
    errors = []
    for s in steps:
        us, _ = solve_semilinear(SemilinearProblem(grid, F, base + s * hv), scheme, settings)
        remainder = DNTrace(grid, DNTrace.from_field(us).values - trace0.values - s * linear.values)
        errors.append(remainder.l2_norm())
    report = DerivativeCheckReport("dn", float(lam), steps, errors)
    logger.info(f"DN Frechet check at lambda={lam:g}: slope {report.slope:.3f}")
    return report
