"""
Rebuild F on the reachable set from tabulated potentials V_lambda.

The first-order solutions v1 are recomputed from V alone; v and F along the
family follow from trapezoid integration in lambda, anchored at F(t, x, 0) = 0.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..discretization.boundary import BoundaryProfile, random_probes
from ..discretization.grid import Field, SpaceTimeGrid
from ..discretization.serialization import AXIS_NAMES, write_table
from ..errors import EmptyValidBox, NonMonotoneTable, OutOfRange
from ..nonlinearity.terms import SemilinearTerm
from ..solver.linear import LinearProblem, ShiftPolicy, positivity_shifted_solve
from ..solver.semilinear import SemilinearProblem, SolverSettings, solve_semilinear
from ..solver.stepping import Scheme
from .dnmap import DNTrace
from .linearize import LinearizationBundle, cumulative_from_zero, symmetric_lambda_grid
from .reachable import ReachableConstants, compute_constants

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.05


@dataclass(frozen=True, eq=False)
class PotentialData:
    """Tabulated potentials, shape (n_lambda, n_levels, *spatial)."""
    grid: SpaceTimeGrid
    lambda_grid: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        expected = (len(self.lambda_grid), self.grid.n_levels) + self.grid.shape
        if self.V.shape != expected:
            raise ValueError(f"potential table shape {self.V.shape}, expected {expected}")
        if not np.all(np.isfinite(self.V)):
            raise ValueError("potential table contains non-finite values")

    @classmethod
    def from_bundle(cls, bundle: LinearizationBundle) -> "PotentialData":
        return cls(bundle.grid, np.array(bundle.lambda_grid), bundle.stack("V"))

    @classmethod
    def constant(cls, grid: SpaceTimeGrid, lambda_grid: np.ndarray, q: Union[float, np.ndarray]) -> "PotentialData":
        """The same potential for every lambda."""
        values = np.broadcast_to(np.asarray(q, dtype=float), (grid.n_levels,) + grid.shape)
        return cls(grid, np.asarray(lambda_grid, dtype=float), np.repeat(values[None], len(lambda_grid), axis=0))


@dataclass(frozen=True, eq=False)
class ReconstructedNonlinearity:
    """
    Per-node monotone tables (s, F, dF) over the lambda grid, restricted to the
    window levels, and the valid box (delta1, T1) x Omega x [-half_width, half_width].
    """
    grid: SpaceTimeGrid
    lambda_grid: np.ndarray
    levels: np.ndarray
    s: np.ndarray
    F: np.ndarray
    dF: np.ndarray
    half_width: float
    delta1: float
    constants: ReachableConstants
    r: float
    margin: float
    _cache: Dict[Tuple[int, ...], PchipInterpolator] = field(default_factory=dict, repr=False)

    @property
    def window_times(self) -> np.ndarray:
        return self.grid.times[self.levels]

    @property
    def valid_box(self) -> Dict[str, Any]:
        return {
            "t": [float(self.delta1), float(self.grid.T)],
            "x": [[0.0, float(L)] for L in self.grid.extents],
            "s": [-self.half_width, self.half_width],
        }

    def node_table(self, k: int, node: Tuple[int, ...]) -> np.ndarray:
        """Columns (lambda, s, F, dF) at window level index k."""
        idx = (slice(None), k) + tuple(node)
        return np.column_stack([self.lambda_grid, self.s[idx], self.F[idx], self.dF[idx]])

    def _interpolant(self, k: int, node: Tuple[int, ...]) -> PchipInterpolator:
        key = (k,) + tuple(node)
        interp = self._cache.get(key)
        if interp is None:
            idx = (slice(None), k) + tuple(node)
            interp = PchipInterpolator(self.s[idx], self.F[idx], extrapolate=False)
            self._cache[key] = interp
        return interp

    def node_values(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """F_rec at every window node for the given s, shape (n_window, *spatial[, n_s])."""
        s_arr = np.asarray(s, dtype=float)
        self._check_s(s_arr)
        out = np.empty((len(self.levels),) + self.grid.shape + s_arr.shape)
        for k in range(len(self.levels)):
            for node in np.ndindex(*self.grid.shape):
                out[(k,) + node] = self._interpolant(k, node)(s_arr)
        if not np.all(np.isfinite(out)):
            raise OutOfRange(
                "s outside the tabulated range at some window node",
                witness={"s": s_arr.tolist(), "half_width": self.half_width},
            )
        return out

    def _check_s(self, s: np.ndarray) -> None:
        if np.any(np.abs(s) > self.half_width * (1 + 1e-12)):
            worst = float(np.max(np.abs(s)))
            raise OutOfRange(
                f"|s|={worst:g} outside the valid box half-width {self.half_width:.6g}",
                witness={"s": worst, "half_width": self.half_width},
            )

    def query(self, t: float, x, s: float) -> float:
        """Monotone cubic in s, multilinear in (t, x); refuses points outside the valid box."""
        self._check_s(np.asarray(s))
        times = self.window_times
        point = np.atleast_1d(np.asarray(x, dtype=float))
        if not times[0] <= t <= times[-1] * (1 + 1e-12) or point.size != self.grid.dim:
            raise OutOfRange(f"(t={t}, x={x}) outside the valid box", witness={"t": t, "x": point.tolist()})
        for value, L in zip(point, self.grid.extents):
            if not 0.0 <= value <= L:
                raise OutOfRange(f"x={x} outside the domain", witness={"t": t, "x": point.tolist()})
        cells = [_bracket(times, t)] + [_bracket(axis, p) for axis, p in zip(self.grid.axes, point)]
        total = 0.0
        for corner in product((0, 1), repeat=len(cells)):
            weight = 1.0
            index = []
            for (lo, frac), c in zip(cells, corner):
                weight *= frac if c else 1.0 - frac
                index.append(lo + c)
            if weight == 0.0:
                continue
            total += weight * float(self._interpolant(index[0], tuple(index[1:]))(s))
        if not np.isfinite(total):
            raise OutOfRange(f"s={s} outside the tabulated range", witness={"t": t, "x": point.tolist(), "s": s})
        return total

    def summary(self) -> Dict[str, Any]:
        return {
            "valid_box": self.valid_box,
            "half_width": self.half_width,
            "a2": self.constants.a2,
            "a1": self.constants.a1,
            "r": self.r,
            "margin": self.margin,
            "n_lambda": len(self.lambda_grid),
            "window_levels": [int(self.levels[0]), int(self.levels[-1])],
        }


def _bracket(axis: np.ndarray, value: float) -> Tuple[int, float]:
    """Lower cell index and fractional position of value on a sorted axis."""
    if len(axis) == 1:
        return 0, 0.0
    k = int(np.clip(np.searchsorted(axis, value, side="right") - 1, 0, len(axis) - 2))
    frac = (value - axis[k]) / (axis[k + 1] - axis[k])
    return k, float(np.clip(frac, 0.0, 1.0))


def potential_bound(data: PotentialData) -> float:
    """Largest tabulated potential, floored at 0: a kappa(0) valid for every lambda of the data."""
    return max(0.0, float(np.max(data.V)))


def reconstruct(data: PotentialData, chi: BoundaryProfile, r: Optional[float] = None,
                kappa0: Optional[float] = None,
                margin: float = DEFAULT_MARGIN, threads: int = 1,
                constants: Optional[ReachableConstants] = None) -> ReconstructedNonlinearity:
    """
    Rebuild F on the reachable set from V_lambda alone.

    Args:
        data: Tabulated potentials on the lambda grid
        chi: Cutoff profile on the same grid
        r: Excitation radius (defaults to the largest |lambda|)
        kappa0: kappa(0) of the auxiliary problem defining a2 (defaults to potential_bound(data))
        margin: Relative shrinkage of the valid box
        threads: Worker threads for the per-lambda first-order solves
        constants: Precomputed reachable constants

    Returns:
        The ReconstructedNonlinearity

    Raises:
        NonMonotoneTable: an s-table is not strictly increasing at a window node
        EmptyValidBox: a2 * r * (1 - margin) is below the s-sample spacing, or an
            s-table does not reach +/- half_width at some window node
    """
    grid = data.grid
    chi = chi.on(grid)
    lambdas = data.lambda_grid
    r = float(np.max(np.abs(lambdas))) if r is None else float(r)
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must lie in [0, 1), got {margin}")

    def first_order(k: int) -> np.ndarray:
        problem = LinearProblem(grid, potential=Field(grid, data.V[k]), dirichlet=chi.values)
        return positivity_shifted_solve(problem, ShiftPolicy.MINIMAL).values

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            v1 = np.stack(list(executor.map(first_order, range(len(lambdas)))))
    else:
        v1 = np.stack([first_order(k) for k in range(len(lambdas))])
    v = cumulative_from_zero(lambdas, v1)
    F = cumulative_from_zero(lambdas, data.V * v1)
    zero = int(np.argmin(np.abs(lambdas)))
    F[zero] = 0.0

    levels = grid.window_levels(chi.delta1)
    s = v[:, levels]
    increments = np.diff(s, axis=0)
    if np.any(increments <= 0):
        bad = np.unravel_index(int(np.argmin(increments)), increments.shape)
        level = int(levels[bad[1]])
        witness = {
            "t": float(grid.times[level]),
            "x": [float(grid.axes[a][i]) for a, i in enumerate(bad[2:])],
            "lambda": [float(lambdas[bad[0]]), float(lambdas[bad[0] + 1])],
            "increment": float(increments[bad]),
        }
        logger.error(f"Non-monotone s-table at {witness}")
        raise NonMonotoneTable("s-table is not strictly increasing in lambda", witness=witness)

    if constants is None:
        if kappa0 is None:
            kappa0 = potential_bound(data)
        constants = compute_constants(0.0, kappa0, chi, grid, chi.delta1)
    half_width = constants.a2 * r * (1.0 - margin)
    spacing = float(np.min(np.minimum(s[zero + 1] - s[zero], s[zero] - s[zero - 1])))
    if not half_width > 0 or half_width < spacing:
        raise EmptyValidBox(
            f"valid half-width {half_width:.6g} below the s-sample spacing {spacing:.6g}",
            witness={"a2": constants.a2, "r": r, "margin": margin, "spacing": spacing},
        )
    reach = np.minimum(s[-1], -s[0])
    if np.any(reach < half_width):
        bad = np.unravel_index(int(np.argmin(reach)), reach.shape)
        witness = {
            "t": float(grid.times[levels[bad[0]]]),
            "x": [float(grid.axes[a][i]) for a, i in enumerate(bad[1:])],
            "reach": float(reach[bad]),
            "half_width": float(half_width),
            "a2": constants.a2,
            "kappa0": constants.kappa0,
        }
        logger.error(f"s-table does not cover the valid box at {witness}")
        raise EmptyValidBox(
            f"s-table reaches only {reach[bad]:.6g} < half-width {half_width:.6g}; kappa0 is below the potentials",
            witness=witness,
        )
    rec = ReconstructedNonlinearity(
        grid=grid, lambda_grid=np.array(lambdas), levels=levels, s=s, F=F[:, levels], dF=data.V[:, levels],
        half_width=float(half_width), delta1=chi.delta1, constants=constants, r=r, margin=margin,
    )
    logger.info(
        f"Reconstructed F on {len(levels)} window levels x {int(np.prod(grid.shape))} nodes, "
        f"s in [-{half_width:.6g}, {half_width:.6g}]"
    )
    return rec


@dataclass
class TruthComparison:
    """Errors of a reconstruction against a known F on the valid box."""
    name: str
    sup_error: float
    l2_error: float
    rms_error: float
    s_samples: int
    worst: List[Dict[str, Any]]

    def to_dict(self) -> Dict[str, Any]:
        return {"nonlinearity": self.name, "sup_error": self.sup_error, "l2_error": self.l2_error,
                "rms_error": self.rms_error, "s_samples": self.s_samples, "worst_offenders": self.worst}


def compare_to_truth(rec: ReconstructedNonlinearity, F_true: SemilinearTerm, s_samples: int = 21,
                     n_worst: int = 5) -> TruthComparison:
    """
    Sup and L2 errors of F_rec against F_true at every window node over an
    s-lattice of the valid box.

    The L2 error uses the product of dt, the spatial cell volume and the s step.
    """
    grid = rec.grid
    s = np.linspace(-rec.half_width, rec.half_width, s_samples)
    values = rec.node_values(s)
    pad = (1,) * grid.dim
    t = rec.window_times.reshape((-1,) + pad + (1,))
    x = tuple(c[None, ..., None] for c in grid.coords)
    truth = np.broadcast_to(np.asarray(F_true.f(t, x, s.reshape((1,) + pad + (-1,))), dtype=float), values.shape)
    error = np.abs(values - truth)
    cell = grid.dt * float(np.prod(grid.h)) * (s[1] - s[0] if s_samples > 1 else 1.0)
    per_node = error.max(axis=-1)
    order = np.argsort(per_node, axis=None)[::-1][:n_worst]
    worst = []
    for flat in order:
        k, *node = np.unravel_index(int(flat), per_node.shape)
        worst.append({
            "t": float(rec.window_times[k]),
            "x": [float(grid.axes[a][i]) for a, i in enumerate(node)],
            "error": float(per_node[(k, *node)]),
        })
    comparison = TruthComparison(
        name=F_true.name,
        sup_error=float(error.max()),
        l2_error=float(np.sqrt(np.sum(error ** 2) * cell)),
        rms_error=float(np.sqrt(np.mean(error ** 2))),
        s_samples=int(s_samples),
        worst=worst,
    )
    logger.info(f"Reconstruction vs {F_true.name}: sup {comparison.sup_error:.3e}, rms {comparison.rms_error:.3e}")
    return comparison


def export_reconstruction(rec: ReconstructedNonlinearity, directory: Union[str, Path],
                          comparison: Optional[TruthComparison] = None) -> List[Path]:
    """Per-node tables as one CSV (t, x[, y], lambda, s, F, dF) plus a summary JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = rec.grid
    n_lambda = len(rec.lambda_grid)
    blocks = []
    for k in range(len(rec.levels)):
        for node in np.ndindex(*grid.shape):
            head = [rec.window_times[k]] + [grid.axes[a][i] for a, i in enumerate(node)]
            blocks.append(np.column_stack([np.tile(head, (n_lambda, 1)), rec.node_table(k, node)]))
    columns = ["t"] + list(AXIS_NAMES[: grid.dim]) + ["lambda", "s", "F", "dF"]
    written = [write_table(directory / "reconstruction_tables.csv", columns, np.vstack(blocks))]
    summary = rec.summary()
    if comparison is not None:
        summary["comparison"] = comparison.to_dict()
    path = directory / "reconstruction_summary.json"
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    written.append(path)
    return written


@dataclass
class UniquenessReport:
    """Max nonlinear trace difference between two terms over lambdas and probes."""
    names: Tuple[str, str]
    max_trace_difference: float
    per_lambda: List[float]
    attained_range: Tuple[float, float]
    tolerance: float
    probes: int

    @property
    def verdict(self) -> str:
        if self.max_trace_difference <= 10 * self.tolerance:
            return "indistinguishable"
        if self.max_trace_difference >= 100 * self.tolerance:
            return "distinguished"
        return "inconclusive"

    def to_dict(self) -> Dict[str, Any]:
        return {"nonlinearities": list(self.names), "max_trace_difference": self.max_trace_difference,
                "per_lambda": self.per_lambda, "attained_range": list(self.attained_range),
                "tolerance": self.tolerance, "probes": self.probes, "verdict": self.verdict}


def bump_variant(F: SemilinearTerm, attained: Tuple[float, float], inside: bool,
                 amplitude: float = 1.0) -> SemilinearTerm:
    """
    F plus a bump in u placed inside the attained range (away from 0), or
    supported beyond twice its largest magnitude.
    """
    reach = max(abs(attained[0]), abs(attained[1]))
    if reach <= 0:
        raise ValueError("attained range is degenerate")
    if inside:
        top = attained[1] if abs(attained[1]) >= abs(attained[0]) else attained[0]
        return F.with_bump(center=0.6 * top, width=0.3 * reach, amplitude=amplitude)
    return F.with_bump(center=3.0 * reach, width=0.9 * reach, amplitude=amplitude)


def uniqueness_probe(F1: SemilinearTerm, F2: SemilinearTerm, chi: BoundaryProfile, r: float,
                     n_lambda: int = 5, probe_count: int = 8, epsilon: Optional[float] = None, seed: int = 0,
                     scheme: Union[Scheme, str] = Scheme.IMPLICIT_EULER,
                     settings: Optional[SolverSettings] = None, threads: int = 1) -> UniquenessReport:
    """
    Compare the nonlinear DN traces of F1 and F2 for every lambda on the grid,
    with h = 0 and a seeded probe set.

    Returns:
        The UniquenessReport; the attained u-range is that of F1's solutions
    """
    settings = settings or SolverSettings()
    grid = chi.grid
    lambdas = symmetric_lambda_grid(r, n_lambda)
    eps = chi.epsilon if epsilon is None else epsilon
    data = [np.zeros((grid.n_levels, grid.n_boundary))]
    data += [h.values[: grid.n_levels] for h in random_probes(grid, probe_count, eps, seed)] if probe_count else []

    def per_lambda(lam: float) -> Tuple[float, float, float]:
        worst, lo, hi = 0.0, 0.0, 0.0
        for h in data:
            g = lam * chi.values + h
            u1, _ = solve_semilinear(SemilinearProblem(grid, F1, g), scheme, settings)
            u2, _ = solve_semilinear(SemilinearProblem(grid, F2, g), scheme, settings)
            diff = (DNTrace.from_field(u1) - DNTrace.from_field(u2)).sup_norm()
            worst = max(worst, diff)
            lo, hi = min(lo, float(u1.values.min())), max(hi, float(u1.values.max()))
        return worst, lo, hi

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(per_lambda, lambdas))
    else:
        results = [per_lambda(lam) for lam in lambdas]
    attained = (min(res[1] for res in results), max(res[2] for res in results))
    report = UniquenessReport(
        names=(F1.name, F2.name),
        max_trace_difference=max(res[0] for res in results),
        per_lambda=[res[0] for res in results],
        attained_range=attained,
        tolerance=settings.newton_tol,
        probes=len(data),
    )
    logger.info(
        f"Uniqueness probe {F1.name} vs {F2.name}: max trace difference {report.max_trace_difference:.3e} "
        f"({report.verdict}), attained u in [{attained[0]:.6g}, {attained[1]:.6g}]"
    )
    return report
