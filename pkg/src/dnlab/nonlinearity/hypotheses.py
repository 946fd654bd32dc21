"""
Sampling checks of the structural hypotheses on a semilinear term.

Each check evaluates F (or its u-derivatives) on a probe lattice built from the
grid's time levels and nodes and reports pass/fail with the worst probe.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..discretization.grid import Field, SpaceTimeGrid
from ..errors import HypothesisViolation
from .terms import SemilinearTerm

logger = logging.getLogger(__name__)

PROBES_PER_AXIS = 17
U_PROBES = 21
ZERO_TOL = 1e-12
SIGN_TOL = 1e-10

QMap = Union[float, Field, Callable[[Any, Tuple[np.ndarray, ...]], np.ndarray]]


class HypothesisStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_CHECKED = "not-checked"


@dataclass
class HypothesisResult:
    """Outcome of one hypothesis with its worst probe."""
    name: str
    status: HypothesisStatus
    worst_value: Optional[float] = None
    witness: Optional[Dict[str, Any]] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "worst_value": self.worst_value,
            "witness": self.witness,
            "detail": self.detail,
        }


@dataclass
class HypothesisReport:
    """Per-hypothesis results; a failing entry always carries a witness."""
    term: str
    results: Dict[str, HypothesisResult] = field(default_factory=dict)

    def add(self, result: HypothesisResult) -> "HypothesisReport":
        self.results[result.name] = result
        return self

    def merge(self, other: "HypothesisReport") -> "HypothesisReport":
        self.results.update(other.results)
        return self

    def status(self, name: str) -> HypothesisStatus:
        return self.results[name].status

    @property
    def passed(self) -> bool:
        return all(r.status != HypothesisStatus.FAIL for r in self.results.values())

    def failures(self) -> Dict[str, HypothesisResult]:
        return {k: r for k, r in self.results.items() if r.status == HypothesisStatus.FAIL}

    def require(self, *names: str) -> None:
        """Raise HypothesisViolation for the first failing hypothesis among names (all when empty)."""
        for name in names or tuple(self.results):
            result = self.results.get(name)
            if result is not None and result.status == HypothesisStatus.FAIL:
                logger.error(f"{self.term} fails {name}: {result.detail}")
                raise HypothesisViolation(
                    f"{self.term} fails hypothesis {name}: {result.detail}", witness=result.witness
                )

    def to_dict(self) -> Dict[str, Any]:
        return {"term": self.term, "results": {k: r.to_dict() for k, r in self.results.items()}}


# -- probe lattice ----------------------------------------------------------

def _subsample(n: int, count: int = PROBES_PER_AXIS) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n - 1, min(n, count))).astype(int))


@dataclass(frozen=True)
class ProbeLattice:
    """Broadcastable (t, x, u) probes; the trailing axis runs over u."""
    levels: np.ndarray
    nodes: Tuple[np.ndarray, ...]
    t: np.ndarray
    x: Tuple[np.ndarray, ...]
    u: np.ndarray

    def witness(self, values: np.ndarray, flat_index: int) -> Dict[str, Any]:
        idx = np.unravel_index(flat_index, values.shape)
        t = np.broadcast_to(self.t, values.shape)[idx]
        x = [float(np.broadcast_to(xi, values.shape)[idx]) for xi in self.x]
        u = np.broadcast_to(self.u, values.shape)[idx]
        return {"t": float(t), "x": x, "u": float(u), "value": float(values[idx])}


def probe_lattice(grid: SpaceTimeGrid, u_values: Sequence[float]) -> ProbeLattice:
    """Subsampled time levels and spatial nodes (boundary included) crossed with u_values."""
    u_values = np.asarray(u_values, dtype=float)
    levels = _subsample(grid.n_levels)
    nodes = tuple(_subsample(n) for n in grid.shape)
    ndim = 1 + grid.dim + 1
    t = grid.times[levels].reshape((-1,) + (1,) * (ndim - 1))
    x = []
    for a, idx in enumerate(nodes):
        shape = [1] * ndim
        shape[1 + a] = -1
        x.append(grid.axes[a][idx].reshape(shape))
    u = u_values.reshape((1,) * (ndim - 1) + (-1,))
    return ProbeLattice(levels, nodes, t, tuple(x), u)


def _q_on_lattice(q: QMap, grid: SpaceTimeGrid, lattice: ProbeLattice) -> np.ndarray:
    if isinstance(q, Field):
        sub = q.values[np.ix_(lattice.levels, *lattice.nodes)]
        return sub[..., None]
    if callable(q):
        return np.asarray(q(lattice.t, lattice.x), dtype=float)
    return np.asarray(float(q))


def _evaluate(func, lattice: ProbeLattice, u=None) -> np.ndarray:
    u = lattice.u if u is None else u
    out = np.asarray(func(lattice.t, lattice.x, u), dtype=float)
    shape = np.broadcast_shapes(lattice.t.shape, *[xi.shape for xi in lattice.x], np.shape(u))
    return np.broadcast_to(out, shape)


def _result(name: str, violation: np.ndarray, lattice: ProbeLattice, values: np.ndarray,
            tol: float, detail: str) -> HypothesisResult:
    """violation > tol marks a failing probe; the worst probe is reported either way."""
    k = int(np.argmax(violation))
    worst = float(violation.ravel()[k])
    witness = lattice.witness(values, k)
    status = HypothesisStatus.FAIL if worst > tol else HypothesisStatus.PASS
    return HypothesisResult(name, status, worst, witness, f"{detail}; worst {worst:.3e}")


# -- individual checks ------------------------------------------------------

def check_t1a(F: SemilinearTerm, grid: SpaceTimeGrid) -> HypothesisReport:
    """F(t, x, 0) = 0 at every probe."""
    lattice = probe_lattice(grid, [0.0])
    values = _evaluate(F.f, lattice)
    result = _result("t1a", np.abs(values), lattice, values, ZERO_TOL, "|F(t,x,0)|")
    return HypothesisReport(F.name).add(result)


def check_t1b(F: SemilinearTerm, grid: SpaceTimeGrid, u_max: float) -> HypothesisReport:
    """d2F/du2 <= 0 for u in [0, u_max] and >= 0 for u in [-u_max, 0]."""
    if u_max <= 0:
        raise ValueError(f"u_max must be positive, got {u_max}")
    lattice = probe_lattice(grid, np.linspace(0.0, u_max, U_PROBES))
    upper = _evaluate(F.d2u, lattice)
    lower = _evaluate(F.d2u, lattice, -lattice.u)
    if np.max(upper) >= np.max(-lower):
        lattice_used, values, violation = lattice, upper, upper
    else:
        lattice_used = ProbeLattice(lattice.levels, lattice.nodes, lattice.t, lattice.x, -lattice.u)
        values, violation = lower, -lower
    result = _result("t1b", violation, lattice_used, values, SIGN_TOL, "sign of d2F/du2")
    return HypothesisReport(F.name).add(result)


def check_t1d(F: SemilinearTerm, q: QMap, grid: SpaceTimeGrid) -> HypothesisReport:
    """dF/du(t, x, 0) <= q(t, x) at every probe."""
    lattice = probe_lattice(grid, [0.0])
    values = _evaluate(F.du, lattice)
    bound = np.broadcast_to(_q_on_lattice(q, grid, lattice), values.shape)
    result = _result("t1d", values - bound, lattice, values, ZERO_TOL, "dF/du(t,x,0) - q")
    return HypothesisReport(F.name).add(result)


def check_p1(F: SemilinearTerm, grid: SpaceTimeGrid, u_max: float) -> HypothesisReport:
    """|F(t, x, u)| <= mu(|u|) with the declared growth function."""
    report = HypothesisReport(F.name)
    mu = F.metadata.mu
    if mu is None:
        return report.add(HypothesisResult("P1", HypothesisStatus.NOT_CHECKED, detail="no growth bound declared"))
    lattice = probe_lattice(grid, np.linspace(-u_max, u_max, 2 * U_PROBES - 1))
    values = _evaluate(F.f, lattice)
    bound = np.asarray(mu(np.abs(lattice.u)), dtype=float)
    violation = np.abs(values) - np.broadcast_to(bound, values.shape)
    return report.add(_result("P1", violation, lattice, values, ZERO_TOL, "|F| - mu(|u|)"))


def check_p2(F: SemilinearTerm, grid: SpaceTimeGrid) -> HypothesisReport:
    """F(0, x, 0) = 0 on the boundary."""
    coords = grid.boundary_coords
    values = np.asarray(np.broadcast_to(F.f(0.0, coords, np.zeros_like(coords[0])), coords[0].shape))
    k = int(np.argmax(np.abs(values))) if values.size else 0
    worst = float(np.abs(values[k])) if values.size else 0.0
    witness = {"t": 0.0, "x": [float(c[k]) for c in coords], "u": 0.0, "value": float(values[k])} if values.size else None
    status = HypothesisStatus.FAIL if worst > ZERO_TOL else HypothesisStatus.PASS
    result = HypothesisResult("P2", status, worst, witness, f"|F(0,x,0)| on the boundary; worst {worst:.3e}")
    return HypothesisReport(F.name).add(result)


def check_p3(F: SemilinearTerm, grid: SpaceTimeGrid, u_max: float) -> HypothesisReport:
    """F(t, x, u) u >= -b1 u^2 - b2 with the declared constants."""
    report = HypothesisReport(F.name)
    b1, b2 = F.metadata.b1, F.metadata.b2
    if b1 is None or b2 is None:
        return report.add(HypothesisResult("P3", HypothesisStatus.NOT_CHECKED, detail="no b1, b2 declared"))
    lattice = probe_lattice(grid, np.linspace(-u_max, u_max, 2 * U_PROBES - 1))
    values = _evaluate(F.f, lattice)
    violation = -(values * lattice.u) - b1 * lattice.u ** 2 - b2
    return report.add(_result("P3", violation, lattice, values, ZERO_TOL, "-(F u) - b1 u^2 - b2"))


def estimate_kappa0(F: SemilinearTerm, grid: SpaceTimeGrid) -> float:
    """
    Sampled sum over k = 0, 1, 2 of the W^{1,inf} norms of d^kF/du^k(., ., 0).

    Gradients in (t, x) are taken with numpy.gradient on the full grid.
    """
    t = grid.times.reshape((-1,) + (1,) * grid.dim)
    x = tuple(c[None, ...] for c in grid.coords)
    shape = (grid.n_levels,) + grid.shape
    total = 0.0
    for func in (F.f, F.du, F.d2u):
        g = np.broadcast_to(np.asarray(func(t, x, np.zeros(shape)), dtype=float), shape)
        norm = float(np.max(np.abs(g)))
        spacings = (grid.dt,) + tuple(grid.h)
        grads = np.gradient(g, *spacings)
        norm += max(float(np.max(np.abs(d))) for d in grads)
        total += norm
    return total


def check_t2a(F: SemilinearTerm, grid: SpaceTimeGrid) -> HypothesisReport:
    """The declared kappa(0) dominates the sampled W^{1,inf} norms at u = 0."""
    report = HypothesisReport(F.name)
    estimate = estimate_kappa0(F, grid)
    kappa0 = F.metadata.kappa0
    if kappa0 is None:
        return report.add(HypothesisResult(
            "t2a", HypothesisStatus.NOT_CHECKED, estimate, detail=f"no kappa0 declared; sampled {estimate:.6g}"
        ))
    excess = estimate - kappa0
    tol = 1e-8 * max(1.0, kappa0)
    status = HypothesisStatus.FAIL if excess > tol else HypothesisStatus.PASS
    witness = {"kappa0": kappa0, "sampled": estimate} if status == HypothesisStatus.FAIL else None
    return report.add(HypothesisResult(
        "t2a", status, excess, witness, f"sampled {estimate:.6g} against kappa0 {kappa0:.6g}"
    ))


def check_derivatives(F: SemilinearTerm, grid: SpaceTimeGrid, u_max: float = 2.0,
                      n_probes: int = 100, seed: int = 0) -> HypothesisReport:
    """
    Consistency of the supplied derivatives with centered differences in u.

    du is compared with a difference of F within 1e-6 relative, d2u with a
    difference of du within 1e-5 relative, on n_probes seeded random points.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, grid.T, n_probes)
    x = tuple(rng.uniform(0.0, L, n_probes) for L in grid.extents)
    u = rng.uniform(-u_max, u_max, n_probes)
    eta = 1e-5 * np.maximum(1.0, np.abs(u))
    report = HypothesisReport(F.name)
    for name, func, deriv, tol in (("du", F.f, F.du, 1e-6), ("d2u", F.du, F.d2u, 1e-5)):
        supplied = np.broadcast_to(np.asarray(deriv(t, x, u), dtype=float), u.shape)
        fd = (np.asarray(func(t, x, u + eta), dtype=float) - np.asarray(func(t, x, u - eta), dtype=float)) / (2 * eta)
        fd = np.broadcast_to(fd, u.shape)
        scale = np.maximum(1.0, np.maximum(np.abs(supplied), np.abs(fd)))
        rel = np.abs(supplied - fd) / scale
        k = int(np.argmax(rel))
        worst = float(rel[k])
        status = HypothesisStatus.FAIL if worst > tol else HypothesisStatus.PASS
        witness = {"t": float(t[k]), "x": [float(xi[k]) for xi in x], "u": float(u[k]),
                   "supplied": float(supplied[k]), "difference": float(fd[k])}
        report.add(HypothesisResult(f"consistency_{name}", status, worst, witness,
                                    f"relative mismatch {worst:.3e} (tol {tol:g})"))
    return report


def check_all(F: SemilinearTerm, grid: SpaceTimeGrid, u_max: float = 2.0,
              q: Optional[QMap] = None) -> HypothesisReport:
    """
    Run every hypothesis check.

    Args:
        F: Term to check
        grid: Grid supplying the (t, x) probes
        u_max: Range of u probes
        q: Potential bounding dF/du(., ., 0); t1d is not checked without it

    Returns:
        The merged HypothesisReport
    """
    report = HypothesisReport(F.name)
    report.merge(check_t1a(F, grid))
    report.merge(check_t1b(F, grid, u_max))
    if q is None:
        report.add(HypothesisResult("t1d", HypothesisStatus.NOT_CHECKED, detail="no q supplied"))
    else:
        report.merge(check_t1d(F, q, grid))
    report.merge(check_p1(F, grid, u_max))
    report.merge(check_p2(F, grid))
    report.merge(check_p3(F, grid, u_max))
    report.merge(check_t2a(F, grid))
    report.merge(check_derivatives(F, grid, u_max))
    summary = {k: r.status.value for k, r in report.results.items()}
    logger.info(f"Hypothesis checks for {F.name}: {summary}")
    return report
