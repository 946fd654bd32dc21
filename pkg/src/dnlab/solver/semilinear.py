"""
Semilinear problem  dt u - Lap u + F(t, x, u) = 0  with Dirichlet data and zero
initial value, solved by Newton iteration at every implicit step.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..discretization.grid import Field, SpaceTimeGrid
from ..errors import BlowUp, NewtonDivergence
from ..nonlinearity.terms import SemilinearTerm
from ..utils.config import ToleranceConfig
from .stepping import Scheme, StepOperator, apply_operator

logger = logging.getLogger(__name__)

COMPATIBILITY_TOL = 1e-14


@dataclass(frozen=True)
class SolverSettings:
    """Newton and blow-up controls."""
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    max_halvings: int = 8
    blowup_cap: float = 1e6

    @classmethod
    def from_tolerances(cls, tolerances: ToleranceConfig) -> "SolverSettings":
        return cls(
            newton_tol=tolerances.newton_tol,
            newton_max_iter=tolerances.newton_max_iter,
            blowup_cap=tolerances.blowup_cap,
        )


@dataclass(eq=False)
class SemilinearProblem:
    """Semilinear problem with boundary data of shape (n_levels, n_boundary)."""
    grid: SpaceTimeGrid
    F: SemilinearTerm
    dirichlet: np.ndarray
    horizon: Optional[float] = None

    def __post_init__(self):
        self.grid = self.grid.truncate(self.horizon)
        g = np.asarray(self.dirichlet, dtype=float)
        if g.shape[0] < self.grid.n_levels or g.shape[1:] != (self.grid.n_boundary,):
            raise ValueError(f"dirichlet shape {g.shape} incompatible with grid")
        if np.max(np.abs(g[0]), initial=0.0) > COMPATIBILITY_TOL:
            raise ValueError("dirichlet data must vanish at t=0 to match the zero initial value")
        self.dirichlet = g[: self.grid.n_levels]


@dataclass
class SolveReport:
    """Diagnostics of one semilinear solve."""
    scheme: str
    newton_iterations: List[int] = field(default_factory=list)
    halvings: List[int] = field(default_factory=list)
    max_residual: float = 0.0
    blowup_flag: bool = False
    first_offending_level: Optional[int] = None
    sup_norm: float = 0.0
    sup_history: List[float] = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def total_iterations(self) -> int:
        return int(sum(self.newton_iterations))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["total_iterations"] = self.total_iterations
        return data


class _StepResidual:
    """Residual and Jacobian of one theta-step, both multiplied by dt."""

    def __init__(self, grid: SpaceTimeGrid, F: SemilinearTerm, theta: float, level: int,
                 u_old: np.ndarray, g_old: np.ndarray, g_new: np.ndarray):
        self.grid = grid
        self.F = F
        self.theta = theta
        self.level = level
        self.x = tuple(c.ravel() for c in grid.interior_coords)
        self.t_new = grid.times[level]
        dt = grid.dt
        self.rhs = u_old + theta * dt * grid.boundary_coupling(g_new)
        if theta < 1.0:
            t_old = grid.times[level - 1]
            explicit = apply_operator(grid, 0.0, u_old) + F.f(t_old, self.x, u_old)
            self.rhs = self.rhs + (1 - theta) * dt * (grid.boundary_coupling(g_old) - explicit)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        dt = self.grid.dt
        implicit = apply_operator(self.grid, 0.0, u) + self.F.f(self.t_new, self.x, u)
        return u + self.theta * dt * implicit - self.rhs

    def jacobian(self, u: np.ndarray) -> StepOperator:
        coefficient = np.broadcast_to(self.F.du(self.t_new, self.x, u), u.shape)
        return StepOperator(self.grid, coefficient, self.theta * self.grid.dt, level=self.level)


def _newton(residual: _StepResidual, u0: np.ndarray, settings: SolverSettings) -> Tuple[np.ndarray, int, int, float]:
    """Damped Newton iteration; returns (u, iterations, halvings, final residual)."""
    u = u0.copy()
    r = residual(u)
    norm = float(np.max(np.abs(r), initial=0.0))
    halvings = 0
    for iteration in range(settings.newton_max_iter + 1):
        if norm <= settings.newton_tol:
            return u, iteration, halvings, norm
        if iteration == settings.newton_max_iter:
            break
        delta = residual.jacobian(u).solve(-r)
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = u + step * delta
            r_trial = residual(trial)
            trial_norm = float(np.max(np.abs(r_trial), initial=0.0))
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            step *= 0.5
            halvings += 1
        else:
            logger.warning(f"Newton at level {residual.level}: no decrease after {settings.max_halvings} halvings")
            break
        u, r, norm = trial, r_trial, trial_norm
    raise NewtonDivergence(
        f"Newton did not reach {settings.newton_tol:g} at level {residual.level} (residual {norm:.3e})",
        level=residual.level,
    )


def solve_semilinear(p: SemilinearProblem, scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                     settings: Optional[SolverSettings] = None,
                     raise_on_failure: bool = True) -> Tuple[Field, SolveReport]:
    """
    Solve the semilinear problem level by level.

    Args:
        p: The semilinear problem
        scheme: implicit_euler or crank_nicolson
        settings: Newton tolerance, iteration budget and blow-up cap
        raise_on_failure: When False, a failed solve returns the partial field
            (NaN from the failing level on) with blowup_flag set

    Returns:
        (solution Field, SolveReport)

    Raises:
        NewtonDivergence: Newton failed at some level
        BlowUp: the sup norm exceeded the cap
    """
    scheme = Scheme(scheme)
    settings = settings or SolverSettings()
    grid = p.grid
    g = p.dirichlet
    report = SolveReport(scheme=scheme.value)
    values = np.zeros((grid.n_levels,) + grid.shape)
    grid.fill_boundary(values[0], g[0])
    report.sup_history.append(float(np.max(np.abs(values[0]))))
    u = np.zeros(grid.n_interior)
    for n in range(grid.nt):
        level = n + 1
        residual = _StepResidual(grid, p.F, scheme.theta, level, u, g[n], g[level])
        try:
            u, iterations, halvings, res = _newton(residual, u, settings)
        except NewtonDivergence as e:
            return _fail(report, values, level, str(e), e, raise_on_failure, grid)
        report.newton_iterations.append(iterations)
        report.halvings.append(halvings)
        report.max_residual = max(report.max_residual, res)
        values[level][grid.interior] = u.reshape(grid.interior_shape)
        grid.fill_boundary(values[level], g[level])
        sup = float(np.max(np.abs(values[level])))
        report.sup_history.append(sup)
        if not np.isfinite(sup) or sup > settings.blowup_cap:
            message = f"sup norm {sup:.3e} exceeds cap {settings.blowup_cap:g} at level {level}"
            return _fail(report, values, level, message, BlowUp(message, level=level), raise_on_failure, grid)
    report.sup_norm = max(report.sup_history)
    logger.debug(
        f"Semilinear solve ({scheme.value}, {p.F.name}): {grid.nt} steps, "
        f"{report.total_iterations} Newton iterations, sup {report.sup_norm:.6g}"
    )
    return Field(grid, values), report


def _fail(report: SolveReport, values: np.ndarray, level: int, message: str, error, raise_on_failure: bool,
          grid: SpaceTimeGrid):
    report.blowup_flag = True
    report.first_offending_level = level
    report.failure = message
    finite = [s for s in report.sup_history if np.isfinite(s)]
    report.sup_norm = max(finite) if finite else float("inf")
    error.report = report
    logger.error(f"Semilinear solve failed: {message}")
    if raise_on_failure:
        raise error
    values[level:] = np.nan
    return Field(grid, values), report
