"""
Reachable-set constants a1, a2 and the monotone inversion s = v_lambda(t, x).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..discretization.boundary import BoundaryProfile
from ..discretization.grid import Field, SpaceTimeGrid
from ..errors import OutOfRange
from ..solver.linear import LinearProblem, ShiftPolicy, positivity_shifted_solve
from .linearize import LinearizationBundle

logger = logging.getLogger(__name__)

PotentialMap = Union[float, Field, Callable[[Any, Tuple[np.ndarray, ...]], np.ndarray]]


def _potential_series(q: PotentialMap, grid: SpaceTimeGrid):
    """A scalar, Field or callable q(t, x) as something LinearProblem accepts."""
    if isinstance(q, Field) or np.isscalar(q):
        return q
    t = grid.times.reshape((-1,) + (1,) * grid.dim)
    x = tuple(c[None, ...] for c in grid.interior_coords)
    values = np.broadcast_to(np.asarray(q(t, x), dtype=float), (grid.n_levels,) + grid.interior_shape)
    return np.array(values)


@dataclass(frozen=True)
class WindowMinimum:
    value: float
    t: float
    x: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "t": self.t, "x": list(self.x)}


def window_minimum(f: Field, delta1: float) -> WindowMinimum:
    """Minimum over interior nodes at time levels t > delta1."""
    grid = f.grid
    levels = grid.window_levels(delta1)
    if levels.size == 0:
        raise ValueError(f"no time level after delta1={delta1}")
    block = f.interior()[levels]
    k = np.unravel_index(int(np.argmin(block)), block.shape)
    level = int(levels[k[0]])
    x = tuple(float(c[tuple(k[1:])]) for c in grid.interior_coords)
    return WindowMinimum(float(block[k]), float(grid.times[level]), x)


@dataclass(frozen=True, eq=False)
class ReachableConstants:
    """Lower bounds of the first-order solution over the window (delta1, T1) x Omega."""
    a1: float
    a2: float
    w: Field
    y: Field
    window: Tuple[float, float]
    kappa0: float
    a1_argmin: WindowMinimum
    a2_argmin: WindowMinimum
    a1_full_horizon: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a1": self.a1,
            "a2": self.a2,
            "kappa0": self.kappa0,
            "window": list(self.window),
            "a1_argmin": self.a1_argmin.to_dict(),
            "a2_argmin": self.a2_argmin.to_dict(),
            "a1_full_horizon": self.a1_full_horizon,
        }


def compute_constants(q: PotentialMap, kappa0: float, chi: BoundaryProfile, grid: Optional[SpaceTimeGrid] = None,
                      delta1: Optional[float] = None, horizon: Optional[float] = None,
                      policy: ShiftPolicy = ShiftPolicy.MINIMAL, threads: int = 1) -> ReachableConstants:
    """
    Solve the auxiliary problems for w (potential q) and y (potential kappa0)
    with boundary chi and take their minima over the window.

    Args:
        q: Potential dominating dF/du(., ., 0)
        kappa0: kappa(0), non-negative
        chi: Cutoff profile
        grid: Grid (defaults to chi's); truncated to horizon when given
        delta1: Start of the window (defaults to chi.delta1)
        horizon: T1
        policy: Shift policy of the positivity-preserving solves
        threads: Run the two solves concurrently when > 1

    Returns:
        The ReachableConstants
    """
    if not np.isfinite(kappa0) or kappa0 < 0:
        raise ValueError(f"kappa0 must be finite and non-negative, got {kappa0}")
    base = grid or chi.grid
    full = chi.on(base) if base.n_levels <= chi.grid.n_levels else chi
    grid_t = base.truncate(horizon)
    chi_t = chi.on(grid_t)
    delta1 = chi.delta1 if delta1 is None else delta1

    def solve(potential) -> Field:
        problem = LinearProblem(grid_t, potential=_potential_series(potential, grid_t), dirichlet=chi_t.values)
        return positivity_shifted_solve(problem, policy)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as executor:
            w, y = executor.map(solve, (q, float(kappa0)))
    else:
        w, y = solve(q), solve(float(kappa0))
    a1_min = window_minimum(w, delta1)
    a2_min = window_minimum(y, delta1)
    a1_full = None
    if grid_t.n_levels < full.grid.n_levels:
        full_problem = LinearProblem(full.grid, potential=_potential_series(q, full.grid), dirichlet=full.values)
        a1_full = window_minimum(positivity_shifted_solve(full_problem, policy), delta1).value
    constants = ReachableConstants(
        a1=a1_min.value, a2=a2_min.value, w=w, y=y, window=(float(delta1), float(grid_t.T)),
        kappa0=float(kappa0), a1_argmin=a1_min, a2_argmin=a2_min, a1_full_horizon=a1_full,
    )
    logger.info(f"Reachable constants: a1={constants.a1:.6g}, a2={constants.a2:.6g} (kappa0={kappa0:g})")
    return constants


@dataclass(frozen=True)
class InversionResult:
    """lambda with v_lambda(t, x) = s at a grid node."""
    lam: float
    bracket: Tuple[float, float]
    residual: float
    t: float
    x: Tuple[float, ...]
    s: float

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "bracket": list(self.bracket), "residual": self.residual,
                "t": self.t, "x": list(self.x), "s": self.s}


def snap_to_node(grid: SpaceTimeGrid, t: float, x) -> Tuple[int, Tuple[int, ...]]:
    """Nearest time level and spatial node."""
    level = int(np.clip(round(t / grid.dt), 0, grid.nt))
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size != grid.dim:
        raise ValueError(f"expected a {grid.dim}-dimensional point, got {x}")
    node = tuple(int(np.clip(round(p / hi), 0, n + 1)) for p, hi, n in zip(point, grid.h, grid.nx))
    return level, node


def invert_lambda(bundle: LinearizationBundle, t: float, x, s: float) -> InversionResult:
    """
    Solve v_lambda(t, x) = s for lambda.

    The bracketing cell comes from the monotone samples over the lambda grid; the
    root is refined on a monotone cubic (PCHIP) with brentq. Ties go to the
    smallest lambda.

    Raises:
        OutOfRange: s lies outside the sampled range of lambda -> v_lambda(t, x)
    """
    grid = bundle.grid
    level, node = snap_to_node(grid, t, x)
    lambdas = bundle.lambda_grid
    samples = np.array([m.v.values[(level,) + node] for m in bundle.members])
    t_node = float(grid.times[level])
    x_node = tuple(float(grid.axes[a][i]) for a, i in enumerate(node))
    if s < samples[0] or s > samples[-1]:
        logger.error(f"s={s:g} outside the sampled range [{samples[0]:.6g}, {samples[-1]:.6g}] at t={t_node}, x={x_node}")
        raise OutOfRange(
            f"s={s:g} outside the sampled range [{samples[0]:.6g}, {samples[-1]:.6g}]",
            witness={"t": t_node, "x": list(x_node), "s": float(s),
                     "range": [float(samples[0]), float(samples[-1])]},
        )
    k = int(np.searchsorted(samples, s, side="left"))
    if samples[k] == s:
        lam = float(lambdas[k])
        return InversionResult(lam, (lam, lam), 0.0, t_node, x_node, float(s))
    interp = PchipInterpolator(lambdas, samples)
    lo, hi = float(lambdas[k - 1]), float(lambdas[k])
    lam = brentq(lambda z: float(interp(z)) - s, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = abs(float(interp(lam)) - s)
    return InversionResult(float(lam), (lo, hi), residual, t_node, x_node, float(s))
