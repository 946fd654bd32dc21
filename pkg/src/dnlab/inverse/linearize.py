"""
First and second linearization of the excitation family u = lambda * chi.

For every lambda on a symmetric grid the bundle holds the solution v, the
potential V = dF/du(v), the first-order solution v1 (boundary chi, potential V)
and the second-order solution v2 (zero boundary, source -d2F/du2(v) v1^2).
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..discretization.boundary import BoundaryProfile, Perturbation
from ..discretization.grid import Field, SpaceTimeGrid
from ..discretization.serialization import AXIS_NAMES, write_table
from ..errors import SolverError
from ..nonlinearity.terms import SemilinearTerm
from ..solver.linear import LinearProblem, ShiftPolicy, positivity_shifted_solve, solve_linear
from ..solver.semilinear import SemilinearProblem, SolveReport, SolverSettings, solve_semilinear
from ..solver.stepping import Scheme
from ..utils.performance import ConvergenceStudy, fit_slope

logger = logging.getLogger(__name__)


def symmetric_lambda_grid(r: float, n_lambda: int) -> np.ndarray:
    """Uniform grid on [-r, r] with an exact 0 and exact mirror symmetry."""
    if n_lambda < 5 or n_lambda % 2 == 0:
        raise ValueError(f"n_lambda must be odd and >= 5, got {n_lambda}")
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    m = n_lambda // 2
    half = r * np.arange(1, m + 1) / m
    return np.concatenate([-half[::-1], [0.0], half])


def cumulative_from_zero(lambdas: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Trapezoid integral from 0 to every lambda on the grid (axis 0 of samples)."""
    zero = int(np.argmin(np.abs(lambdas)))
    out = np.empty_like(samples, dtype=float)
    out[zero:] = cumulative_trapezoid(samples[zero:], lambdas[zero:], axis=0, initial=0)
    out[: zero + 1] = cumulative_trapezoid(samples[zero::-1], lambdas[zero::-1], axis=0, initial=0)[::-1]
    return out


def potential_field(F: SemilinearTerm, solution: Field, order: int = 1) -> Field:
    """d^order F / du^order evaluated along a solution, on every node."""
    grid = solution.grid
    t = grid.times.reshape((-1,) + (1,) * grid.dim)
    x = tuple(c[None, ...] for c in grid.coords)
    func = F.du if order == 1 else F.d2u
    values = np.broadcast_to(np.asarray(func(t, x, solution.values), dtype=float), solution.values.shape)
    return Field(grid, np.array(values))


@dataclass(frozen=True, eq=False)
class BundleMember:
    """One lambda of the cascade."""
    lam: float
    v: Field
    V: Field
    v1: Field
    v2: Field
    report: SolveReport


def solve_member(F: SemilinearTerm, chi: BoundaryProfile, lam: float,
                 scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                 settings: Optional[SolverSettings] = None,
                 policy: ShiftPolicy = ShiftPolicy.MINIMAL) -> BundleMember:
    """Solve the cascade at a single lambda; solver errors are tagged with lambda."""
    grid = chi.grid
    try:
        v, report = solve_semilinear(SemilinearProblem(grid, F, lam * chi.values), scheme, settings)
        V = potential_field(F, v, 1)
        v1 = positivity_shifted_solve(LinearProblem(grid, potential=V, dirichlet=chi.values), policy)
        curvature = potential_field(F, v, 2)
        source = -(curvature.values * v1.values ** 2)[(slice(None),) + grid.interior]
        v2 = solve_linear(LinearProblem(grid, potential=V, source=source), Scheme.IMPLICIT_EULER)
    except SolverError as e:
        logger.error(f"Linearization cascade failed at lambda={lam:g}: {e}")
        raise e.with_lambda(lam)
    return BundleMember(float(lam), v, V, v1, v2, report)


@dataclass(frozen=True, eq=False)
class LinearizationBundle:
    """Lambda-indexed solutions, potentials and linearizations; immutable once built."""
    F: SemilinearTerm
    chi: BoundaryProfile
    r: float
    lambda_grid: np.ndarray
    members: Tuple[BundleMember, ...]
    scheme: str = Scheme.IMPLICIT_EULER.value
    settings: SolverSettings = field(default_factory=SolverSettings)
    policy: ShiftPolicy = ShiftPolicy.MINIMAL

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.chi.grid

    @property
    def v(self) -> List[Field]:
        return [m.v for m in self.members]

    @property
    def V(self) -> List[Field]:
        return [m.V for m in self.members]

    @property
    def v1(self) -> List[Field]:
        return [m.v1 for m in self.members]

    @property
    def v2(self) -> List[Field]:
        return [m.v2 for m in self.members]

    @property
    def zero_index(self) -> int:
        return int(np.argmin(np.abs(self.lambda_grid)))

    def index_of(self, lam: float) -> int:
        k = int(np.argmin(np.abs(self.lambda_grid - lam)))
        if not np.isclose(self.lambda_grid[k], lam, rtol=0.0, atol=1e-12 * max(1.0, self.r)):
            raise ValueError(f"lambda={lam} is not on the bundle's grid")
        return k

    def stack(self, name: str) -> np.ndarray:
        """Array of shape (n_lambda, n_levels, *spatial) for v, V, v1 or v2."""
        return np.stack([getattr(m, name).values for m in self.members])

    def member(self, lam: float) -> BundleMember:
        """The cascade at any lambda: stored when on the grid, solved otherwise."""
        k = int(np.argmin(np.abs(self.lambda_grid - lam)))
        if self.lambda_grid[k] == lam:
            return self.members[k]
        return solve_member(self.F, self.chi, lam, self.scheme, self.settings, self.policy)

    def attained_range(self) -> Tuple[float, float]:
        """Smallest and largest solution value over all lambdas."""
        values = self.stack("v")
        return float(np.min(values)), float(np.max(values))

    def describe(self) -> Dict[str, Any]:
        return {
            "nonlinearity": self.F.name,
            "r": self.r,
            "n_lambda": len(self.lambda_grid),
            "lambda_grid": self.lambda_grid.tolist(),
            "scheme": self.scheme,
            "shift_policy": self.policy.value,
            "newton_tol": self.settings.newton_tol,
            "newton_max_iter": self.settings.newton_max_iter,
            "blowup_cap": self.settings.blowup_cap,
            "delta1": self.chi.delta1,
            "delta2": self.chi.delta2,
            "grid": self.grid.describe(),
            "newton_iterations": [m.report.total_iterations for m in self.members],
        }


def build_bundle(F: SemilinearTerm, chi: BoundaryProfile, r: float, n_lambda: int,
                 grid: Optional[SpaceTimeGrid] = None,
                 scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                 settings: Optional[SolverSettings] = None,
                 horizon: Optional[float] = None,
                 threads: int = 1,
                 policy: ShiftPolicy = ShiftPolicy.MINIMAL) -> LinearizationBundle:
    """
    Build the linearization bundle over a symmetric lambda grid.

    Args:
        F: Semilinear term
        chi: Cutoff profile (its grid is used when grid is None)
        r: Excitation radius
        n_lambda: Odd number of lambda samples, at least 5
        grid: Grid to solve on; must match chi's spatial layout and time step
        scheme: Scheme of the semilinear solves
        settings: Newton controls
        horizon: Optional T1 truncating the grid
        threads: Worker threads for independent lambdas
        policy: Shift policy of the first-order solves

    Returns:
        The LinearizationBundle
    """
    base = grid or chi.grid
    grid_t = base.truncate(horizon)
    chi_t = chi.on(grid_t)
    scheme = Scheme(scheme)
    settings = settings or SolverSettings()
    lambdas = symmetric_lambda_grid(r, n_lambda)
    logger.info(f"Building linearization bundle for {F.name}: r={r}, n_lambda={n_lambda}, threads={threads}")

    def task(lam: float) -> BundleMember:
        return solve_member(F, chi_t, lam, scheme, settings, policy)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            members = list(executor.map(task, lambdas))
    else:
        members = [task(lam) for lam in lambdas]
    bundle = LinearizationBundle(F, chi_t, float(r), lambdas, tuple(members), scheme.value, settings, policy)
    total = sum(m.report.total_iterations for m in members)
    logger.info(f"Bundle complete: {len(members)} members, {total} Newton iterations")
    return bundle


@dataclass
class DerivativeCheckReport:
    """Finite-difference errors against a claimed derivative, with the fitted slope."""
    kind: str
    lam: float
    steps: List[float]
    errors: List[float]

    @property
    def slope(self) -> float:
        return fit_slope(self.steps, self.errors)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "lambda": self.lam, "steps": self.steps,
                "errors": self.errors, "slope": self.slope}

    def as_study(self) -> ConvergenceStudy:
        return ConvergenceStudy(f"frechet_{self.kind}", list(self.steps), list(self.errors), {"lambda": self.lam})


def validate_steps(steps: Sequence[float]) -> List[float]:
    steps = [float(s) for s in steps]
    if len(steps) < 3:
        raise ValueError(f"need at least 3 step sizes, got {len(steps)}")
    if any(s <= 0 for s in steps) or any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError(f"steps must be positive and strictly decreasing, got {steps}")
    return steps


def check_frechet_s(F: SemilinearTerm, chi: BoundaryProfile, lam: float, h: Perturbation,
                    steps: Sequence[float], scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                    settings: Optional[SolverSettings] = None) -> DerivativeCheckReport:
    """
    Compare (u(lam chi + s h) - u(lam chi)) / s with the linearized solution.

    The linearized solution solves the linear problem with potential
    dF/du(u(lam chi)) and boundary h in the same scheme, so the error is the
    first-order Taylor remainder.
    """
    steps = validate_steps(steps)
    grid = chi.grid
    scheme = Scheme(scheme)
    hv = h.values[: grid.n_levels]
    base = lam * chi.values
    u0, _ = solve_semilinear(SemilinearProblem(grid, F, base), scheme, settings)
    V = potential_field(F, u0, 1)
    u1 = solve_linear(LinearProblem(grid, potential=V, dirichlet=hv), scheme)
    errors = []
    for s in steps:
        us, _ = solve_semilinear(SemilinearProblem(grid, F, base + s * hv), scheme, settings)
        errors.append(float(np.max(np.abs((us.values - u0.values) / s - u1.values))))
        logger.debug(f"Frechet check in s: s={s:g} error={errors[-1]:.3e}")
    report = DerivativeCheckReport("s", float(lam), steps, errors)
    logger.info(f"Frechet check in s at lambda={lam:g}: slope {report.slope:.3f}")
    return report


def check_frechet_lambda(bundle: LinearizationBundle, lam: float, deltas: Sequence[float]) -> DerivativeCheckReport:
    """Compare (v1(lam + d) - v1(lam)) / d with v2(lam)."""
    deltas = validate_steps(deltas)
    for d in deltas:
        if abs(lam + d) > bundle.r * (1 + 1e-12) or abs(lam) > bundle.r * (1 + 1e-12):
            raise ValueError(f"lambda={lam} + delta={d} leaves [-r, r] with r={bundle.r}")
    centre = bundle.member(lam)
    errors = []
    for d in deltas:
        shifted = bundle.member(lam + d)
        diff = (shifted.v1.values - centre.v1.values) / d - centre.v2.values
        errors.append(float(np.max(np.abs(diff))))
    report = DerivativeCheckReport("lambda", float(lam), deltas, errors)
    logger.info(f"Frechet check in lambda at lambda={lam:g}: slope {report.slope:.3f}")
    return report


def integral_identity_check(bundle: LinearizationBundle) -> float:
    """
    Max over lambda of the relative sup-norm gap between v and the trapezoid
    integral of v1 from 0 to lambda.
    """
    v = bundle.stack("v")
    rebuilt = cumulative_from_zero(bundle.lambda_grid, bundle.stack("v1"))
    worst = 0.0
    for k in range(len(bundle.lambda_grid)):
        scale = float(np.max(np.abs(v[k])))
        gap = float(np.max(np.abs(rebuilt[k] - v[k])))
        if scale > 0:
            worst = max(worst, gap / scale)
        else:
            worst = max(worst, gap)
    logger.info(f"Integral identity: max relative error {worst:.3e}")
    return worst


def export_bundle(bundle: LinearizationBundle, directory: Union[str, Path]) -> List[Path]:
    """
    Write one CSV per lambda (t, x[, y], v, V, v1, v2) plus a JSON manifest.

    Returns:
        Paths of the written files
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = bundle.grid
    n_nodes = int(np.prod(grid.shape))
    t = np.repeat(grid.times, n_nodes)
    coords = [np.tile(c.ravel(), grid.n_levels) for c in grid.coords]
    columns = ["t"] + list(AXIS_NAMES[: grid.dim]) + ["v", "V", "v1", "v2"]
    written = []
    for k, m in enumerate(bundle.members):
        rows = np.column_stack(
            [t] + coords + [m.v.values.ravel(), m.V.values.ravel(), m.v1.values.ravel(), m.v2.values.ravel()]
        )
        written.append(write_table(directory / f"lambda_{k:03d}.csv", columns, rows))
    manifest = directory / "bundle.json"
    with open(manifest, "w") as f:
        json.dump(bundle.describe(), f, indent=2, sort_keys=True)
    written.append(manifest)
    return written
