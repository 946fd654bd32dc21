"""
Linear parabolic problems  dt u - Lap u + V u = f  with Dirichlet data and zero
initial value.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from ..discretization.grid import Field, SpaceTimeGrid
from ..errors import SolverError
from .stepping import Scheme, StepOperator, apply_operator

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray, Field, None]


def _interior_series(grid: SpaceTimeGrid, value: ArrayLike, name: str) -> np.ndarray:
    """Normalize a potential or source to shape (n_levels, n_interior)."""
    shape = (grid.n_levels, grid.n_interior)
    if value is None:
        return np.zeros(shape)
    if isinstance(value, Field):
        if value.grid.n_levels < grid.n_levels:
            raise ValueError(f"{name} field has fewer levels than the grid")
        return value.interior()[: grid.n_levels].reshape(shape)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape[0] < grid.n_levels:
        raise ValueError(f"{name} has {arr.shape[0]} levels, grid needs {grid.n_levels}")
    return arr[: grid.n_levels].reshape(shape)


@dataclass(eq=False)
class LinearProblem:
    """
    Linear problem with potential, source and Dirichlet data.

    potential and source live on interior nodes, per time level; a scalar is
    broadcast. dirichlet has shape (n_levels, n_boundary); None means zero.
    """
    grid: SpaceTimeGrid
    potential: ArrayLike = None
    source: ArrayLike = None
    dirichlet: Optional[np.ndarray] = None
    horizon: Optional[float] = None
    V: np.ndarray = field(init=False, repr=False)
    f: np.ndarray = field(init=False, repr=False)
    g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.grid = self.grid.truncate(self.horizon)
        self.V = _interior_series(self.grid, self.potential, "potential")
        self.f = _interior_series(self.grid, self.source, "source")
        if self.dirichlet is None:
            self.g = np.zeros((self.grid.n_levels, self.grid.n_boundary))
        else:
            g = np.asarray(self.dirichlet, dtype=float)
            if g.shape[0] < self.grid.n_levels or g.shape[1:] != (self.grid.n_boundary,):
                raise ValueError(f"dirichlet shape {g.shape} incompatible with grid")
            self.g = g[: self.grid.n_levels]
        if not (np.all(np.isfinite(self.V)) and np.all(np.isfinite(self.f))):
            raise ValueError("potential and source must be finite")

    def shifted(self, shift: float) -> "LinearProblem":
        """The problem for exp(-shift t) u: potential + shift, data damped by exp(-shift t)."""
        damping = np.exp(-shift * self.grid.times)
        return LinearProblem(
            self.grid,
            potential=self.V + shift,
            source=self.f * damping[:, None],
            dirichlet=self.g * damping[:, None],
        )


def solve_linear(p: LinearProblem, scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER) -> Field:
    """
    Time-step a linear problem.

    Implicit Euler samples the potential and source at level n+1; Crank-Nicolson
    averages levels n and n+1.

    Args:
        p: The linear problem
        scheme: implicit_euler or crank_nicolson

    Returns:
        The discrete solution, boundary rows equal to the Dirichlet data

    Raises:
        SingularStepMatrix: when a step matrix cannot be factorized
    """
    scheme = Scheme(scheme)
    grid = p.grid
    theta = scheme.theta
    theta_dt = theta * grid.dt
    values = np.zeros((grid.n_levels,) + grid.shape)
    grid.fill_boundary(values[0], p.g[0])
    coupling = np.stack([grid.boundary_coupling(p.g[n]) for n in range(grid.n_levels)])
    constant_potential = bool(np.all(p.V[1:] == p.V[1]))
    operator = StepOperator(grid, p.V[1], theta_dt, level=1) if constant_potential else None
    u = np.zeros(grid.n_interior)
    for n in range(grid.nt):
        step = operator if constant_potential else StepOperator(grid, p.V[n + 1], theta_dt, level=n + 1)
        rhs = u + grid.dt * theta * (p.f[n + 1] + coupling[n + 1])
        if theta < 1.0:
            rhs += grid.dt * (1 - theta) * (p.f[n] + coupling[n] - apply_operator(grid, p.V[n], u))
        u = step.solve(rhs)
        values[n + 1][grid.interior] = u.reshape(grid.interior_shape)
        grid.fill_boundary(values[n + 1], p.g[n + 1])
    logger.debug(f"Linear solve ({scheme.value}) over {grid.nt} steps, sup {np.max(np.abs(values)):.6g}")
    return Field(grid, values)


class ShiftPolicy(str, Enum):
    """How the exponential shift M is chosen."""
    SUP = "sup"
    MINIMAL = "minimal"


def shift_for(p: LinearProblem, policy: Union[ShiftPolicy, str] = ShiftPolicy.SUP) -> float:
    """The shift M of a policy: sup|V|, or zero when 1 + dt*min V > 0 under MINIMAL."""
    policy = ShiftPolicy(policy)
    sup = float(np.max(np.abs(p.V[1:]))) if p.grid.nt else 0.0
    if policy is ShiftPolicy.MINIMAL and 1.0 + p.grid.dt * float(np.min(p.V[1:])) > 0.0:
        return 0.0
    return sup


def positivity_shifted_solve(p: LinearProblem, policy: Union[ShiftPolicy, str] = ShiftPolicy.SUP) -> Field:
    """
    Implicit Euler solve of the shifted problem, rescaled back by exp(M t).

    The shifted potential V + M is non-negative, so every step matrix is an
    M-matrix and the discrete maximum principle holds.

    Args:
        p: The linear problem
        policy: Choice of the shift M

    Returns:
        The unshifted solution
    """
    shift = shift_for(p, policy)
    if shift == 0.0:
        return solve_linear(p, Scheme.IMPLICIT_EULER)
    try:
        damped = solve_linear(p.shifted(shift), Scheme.IMPLICIT_EULER)
    except SolverError:
        logger.error(f"Shifted solve failed with M={shift:.6g}")
        raise
    growth = np.exp(shift * p.grid.times).reshape((-1,) + (1,) * p.grid.dim)
    logger.debug(f"Positivity shift M={shift:.6g} ({ShiftPolicy(policy).value})")
    values = damped.values * growth
    for n in range(p.grid.n_levels):
        p.grid.fill_boundary(values[n], p.g[n])
    return Field(p.grid, values)
