"""
Space-time discretization of the cylinder (0, T) x Omega.

Omega is an interval (dim=1) or a rectangle (dim=2). Nodes are uniform and
include the boundary: along axis i there are nx[i] interior nodes and two
boundary nodes, x_k = k * h[i] for k = 0 .. nx[i] + 1.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..errors import GridError
from ..utils.config import GridConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryNodes:
    """Bookkeeping for the normal-trace set (corners excluded in 2D)."""
    index: Tuple[np.ndarray, ...]   # per-axis integer index of each node
    normal_axis: np.ndarray          # axis of the outward normal
    normal_sign: np.ndarray          # -1 on the low face, +1 on the high face
    weight: np.ndarray               # quadrature weight along the boundary
    flat: np.ndarray                 # raveled index of the node
    inward1: np.ndarray              # raveled index one step inside
    inward2: np.ndarray              # raveled index two steps inside

    def __len__(self) -> int:
        return int(self.flat.size)


@dataclass(frozen=True, eq=False)
class SpaceTimeGrid:
    """Uniform grid on (0, T) x Omega with boundary and stencil bookkeeping."""
    dim: int
    extents: Tuple[float, ...]
    nx: Tuple[int, ...]
    nt: int
    T: float
    h: Tuple[float, ...] = field(init=False)
    dt: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(L / (n + 1) for L, n in zip(self.extents, self.nx)))
        object.__setattr__(self, "dt", self.T / self.nt)

    # -- shapes -------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        """Spatial shape including boundary nodes."""
        return tuple(n + 2 for n in self.nx)

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return tuple(self.nx)

    @property
    def n_interior(self) -> int:
        return int(np.prod(self.nx))

    @property
    def n_levels(self) -> int:
        return self.nt + 1

    @property
    def interior(self) -> Tuple[slice, ...]:
        return tuple(slice(1, -1) for _ in range(self.dim))

    @property
    def illustrative(self) -> bool:
        """The 1D setting sits below the dimension covered by the theory."""
        return self.dim == 1

    # -- coordinates --------------------------------------------------------

    @cached_property
    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.arange(n + 2) * hi for n, hi in zip(self.nx, self.h))

    @cached_property
    def coords(self) -> Tuple[np.ndarray, ...]:
        """Full spatial coordinate arrays (indexing='ij')."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def interior_coords(self) -> Tuple[np.ndarray, ...]:
        return tuple(c[self.interior] for c in self.coords)

    @cached_property
    def boundary_coords(self) -> Tuple[np.ndarray, ...]:
        return tuple(c[self.boundary.index] for c in self.coords)

    # -- boundary -----------------------------------------------------------

    @cached_property
    def boundary(self) -> BoundaryNodes:
        index = [[] for _ in range(self.dim)]
        axis, sign, weight = [], [], []
        inward1, inward2 = [], []
        for a in range(self.dim):
            n_a = self.nx[a]
            tangential = [b for b in range(self.dim) if b != a]
            tangential_ranges = [np.arange(1, self.nx[b] + 1) for b in tangential]
            if tangential_ranges:
                tangential_points = np.stack(
                    [m.ravel() for m in np.meshgrid(*tangential_ranges, indexing="ij")], axis=1
                )
            else:
                tangential_points = np.zeros((1, 0), dtype=int)
            w = float(np.prod([self.h[b] for b in tangential])) if tangential else 1.0
            for s, k in ((-1, 0), (1, n_a + 1)):
                for point in tangential_points:
                    node = [0] * self.dim
                    node[a] = k
                    for b, value in zip(tangential, point):
                        node[b] = int(value)
                    step1 = list(node)
                    step1[a] = k - s
                    step2 = list(node)
                    step2[a] = k - 2 * s
                    for d in range(self.dim):
                        index[d].append(node[d])
                    axis.append(a)
                    sign.append(s)
                    weight.append(w)
                    inward1.append(np.ravel_multi_index(step1, self.shape))
                    inward2.append(np.ravel_multi_index(step2, self.shape))
        index_arrays = tuple(np.asarray(ix, dtype=int) for ix in index)
        return BoundaryNodes(
            index=index_arrays,
            normal_axis=np.asarray(axis, dtype=int),
            normal_sign=np.asarray(sign, dtype=int),
            weight=np.asarray(weight, dtype=float),
            flat=np.ravel_multi_index(index_arrays, self.shape),
            inward1=np.asarray(inward1, dtype=int),
            inward2=np.asarray(inward2, dtype=int),
        )

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @cached_property
    def corners(self) -> Tuple[Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]], ...]:
        """(corner, neighbour_a, neighbour_b) index triples; empty in 1D."""
        if self.dim != 2:
            return ()
        last = (self.nx[0] + 1, self.nx[1] + 1)
        out = []
        for i, di in ((0, 1), (last[0], -1)):
            for j, dj in ((0, 1), (last[1], -1)):
                out.append(((i, j), (i + di, j), (i, j + dj)))
        return tuple(out)

    # -- assembly -----------------------------------------------------------

    def assemble(self, interior_values: np.ndarray, boundary_values: np.ndarray) -> np.ndarray:
        """Build a full spatial array from interior values and boundary data."""
        full = np.zeros(self.shape)
        full[self.interior] = np.reshape(interior_values, self.interior_shape)
        self.fill_boundary(full, boundary_values)
        return full

    def fill_boundary(self, full: np.ndarray, boundary_values: np.ndarray) -> None:
        """Write boundary data in place; 2D corners get the mean of their edge neighbours."""
        full[self.boundary.index] = boundary_values
        for corner, na, nb in self.corners:
            full[corner] = 0.5 * (full[na] + full[nb])

    def truncate(self, horizon: Optional[float]) -> "SpaceTimeGrid":
        """Grid on [0, horizon] with the same time step."""
        if horizon is None or np.isclose(horizon, self.T, rtol=0.0, atol=1e-12 * max(1.0, self.T)):
            return self
        if horizon <= 0 or horizon > self.T * (1 + 1e-12):
            raise GridError(f"horizon {horizon} outside (0, {self.T}]")
        levels = horizon / self.dt
        nt = int(round(levels))
        if abs(levels - nt) > 1e-8 * max(1.0, levels):
            raise GridError(f"horizon {horizon} is not a multiple of dt={self.dt}")
        if nt < 2:
            raise GridError(f"horizon {horizon} leaves fewer than 2 time steps")
        return SpaceTimeGrid(self.dim, self.extents, self.nx, nt, nt * self.dt)

    def window_levels(self, delta1: float) -> np.ndarray:
        """Time levels strictly after delta1 (the open window (delta1, T))."""
        return np.nonzero(self.times > delta1 * (1 + 1e-12))[0]

    def level_of(self, t: float) -> int:
        """Index of the time level at t; raises when t is not on the grid."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.nt or abs(k * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise GridError(f"time {t} is not a grid level")
        return k

    def node_of(self, x: Union[float, Tuple[float, ...]]) -> Tuple[int, ...]:
        """Index of the spatial node at x; raises when x is not a grid node."""
        point = np.atleast_1d(np.asarray(x, dtype=float))
        if point.size != self.dim:
            raise GridError(f"expected a {self.dim}-dimensional point, got {x}")
        idx = []
        for value, hi, n in zip(point, self.h, self.nx):
            k = int(round(value / hi))
            if k < 0 or k > n + 1 or abs(k * hi - value) > 1e-9:
                raise GridError(f"point {x} is not a grid node")
            idx.append(k)
        return tuple(idx)

    # -- stencils -----------------------------------------------------------

    def laplacian_full(self, full: np.ndarray) -> np.ndarray:
        """Centered 3-point (1D) / 5-point (2D) Laplacian on interior nodes."""
        if full.shape != self.shape:
            raise GridError(f"shape mismatch: expected {self.shape}, got {full.shape}")
        out = np.zeros(self.interior_shape)
        for a in range(self.dim):
            lo = list(self.interior)
            hi = list(self.interior)
            lo[a] = slice(0, -2)
            hi[a] = slice(2, None)
            out += (full[tuple(lo)] - 2.0 * full[self.interior] + full[tuple(hi)]) / self.h[a] ** 2
        return out

    def boundary_coupling(self, boundary_values: np.ndarray) -> np.ndarray:
        """Contribution of Dirichlet data to the interior Laplacian (flattened)."""
        full = np.zeros(self.shape)
        full[self.boundary.index] = boundary_values
        return self.laplacian_full(full).ravel()

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Interior Laplacian with homogeneous Dirichlet rows folded out."""
        blocks = []
        for a in range(self.dim):
            n = self.nx[a]
            d2 = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / self.h[a] ** 2
            factors = [sp.identity(m) for m in self.nx]
            factors[a] = d2
            block = factors[0]
            for f in factors[1:]:
                block = sp.kron(block, f)
            blocks.append(block)
        return sp.csr_matrix(sum(blocks))

    def normal_trace(self, values: np.ndarray) -> np.ndarray:
        """
        One-sided second-order outward normal derivative at boundary nodes.

        Args:
            values: Array of shape (..., *self.shape)

        Returns:
            Array of shape (..., n_boundary)
        """
        lead = values.shape[: values.ndim - self.dim]
        flat = values.reshape(lead + (-1,))
        b = self.boundary
        spacing = np.asarray(self.h)[b.normal_axis]
        return (3.0 * flat[..., b.flat] - 4.0 * flat[..., b.inward1] + flat[..., b.inward2]) / (2.0 * spacing)

    def boundary_l2(self, boundary_values: np.ndarray) -> float:
        """Discrete L2((0,T) x dOmega) norm of boundary data of shape (nt+1, n_boundary)."""
        sq = boundary_values ** 2 * self.boundary.weight
        return float(np.sqrt(self.dt * np.sum(sq[1:])))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "extents": list(self.extents),
            "nx": list(self.nx),
            "nt": self.nt,
            "T": self.T,
            "h": list(self.h),
            "dt": self.dt,
            "illustrative": self.illustrative,
        }


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar space-time function on a grid, boundary nodes included."""
    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        expected = (self.grid.n_levels,) + self.grid.shape
        if values.shape != expected:
            raise GridError(f"field shape {values.shape} does not match grid {expected}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "Field":
        return cls(grid, np.zeros((grid.n_levels,) + grid.shape))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, func) -> "Field":
        """Tabulate func(t, x) on every node; x is the tuple of coordinate arrays."""
        values = np.stack([np.broadcast_to(func(t, grid.coords), grid.shape) for t in grid.times])
        return cls(grid, np.array(values, dtype=float))

    def at(self, level: int) -> np.ndarray:
        return self.values[level]

    def interior(self, level: Optional[int] = None) -> np.ndarray:
        if level is None:
            return self.values[(slice(None),) + self.grid.interior]
        return self.values[level][self.grid.interior]

    def boundary(self) -> np.ndarray:
        """Boundary values, shape (nt+1, n_boundary)."""
        return self.values[(slice(None),) + self.grid.boundary.index]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)


def build_grid(config: GridConfig) -> SpaceTimeGrid:
    """
    Build a space-time grid from its configuration.

    Args:
        config: Grid configuration (dim, extents, nx, nt, T)

    Returns:
        A validated SpaceTimeGrid
    """
    if config.dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {config.dim}")
    extents = tuple(float(e) for e in config.extents)
    nx = tuple(int(n) for n in config.nx)
    if len(extents) != config.dim or len(nx) != config.dim:
        raise GridError(f"extents and nx must have {config.dim} entries")
    if any(e <= 0 for e in extents):
        raise GridError(f"extents must be positive, got {extents}")
    if any(n < 3 for n in nx):
        raise GridError(f"need at least 3 interior nodes per axis, got {nx}")
    if config.nt < 2:
        raise GridError(f"need at least 2 time steps, got {config.nt}")
    if config.T <= 0:
        raise GridError(f"final time must be positive, got {config.T}")
    grid = SpaceTimeGrid(config.dim, extents, nx, int(config.nt), float(config.T))
    logger.debug(f"Built {config.dim}D grid nx={nx} nt={config.nt} h={grid.h} dt={grid.dt}")
    return grid


def laplacian_apply(f: Union[Field, np.ndarray], t_level: int) -> np.ndarray:
    """Discrete Laplacian of a field at one time level, on interior nodes."""
    if isinstance(f, Field):
        return f.grid.laplacian_full(f.at(t_level))
    raise TypeError("laplacian_apply expects a Field")


def normal_derivative(f: Field, t_level: int) -> np.ndarray:
    """Outward normal derivative at every boundary node for one time level."""
    return f.grid.normal_trace(f.at(t_level))
