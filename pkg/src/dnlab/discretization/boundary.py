"""
Lateral boundary data: the cutoff profile chi and admissible perturbations h.

Hoelder norms are replaced by a discrete surrogate built from scaled finite
differences with alpha = 1/2.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import PerturbationTooLarge
from .grid import SpaceTimeGrid

logger = logging.getLogger(__name__)

ALPHA = 0.5
PERTURBATION_SHAPES = ("time_bump", "boundary_bump", "random_smooth")


def smoothstep(tau: np.ndarray) -> np.ndarray:
    """Quintic ramp: 0 on [0, 1/4], 1 on [1, inf), C2 and monotone in between."""
    z = np.clip((np.asarray(tau, dtype=float) - 0.25) / 0.75, 0.0, 1.0)
    return z ** 3 * (10.0 - 15.0 * z + 6.0 * z ** 2)


def _faces(grid: SpaceTimeGrid):
    """Contiguous boundary-node blocks, one per face, in tangential order."""
    b = grid.boundary
    keys = list(zip(b.normal_axis.tolist(), b.normal_sign.tolist()))
    blocks, start = [], 0
    for k in range(1, len(keys) + 1):
        if k == len(keys) or keys[k] != keys[start]:
            blocks.append((keys[start][0], slice(start, k)))
            start = k
    return blocks


def discrete_holder_surrogate(values: np.ndarray, grid: SpaceTimeGrid, alpha: float = ALPHA) -> float:
    """
    Discrete surrogate of the C^{1+alpha/2}-in-time / C^{2+alpha}-in-space norm.

    Args:
        values: Boundary data of shape (nt+1, n_boundary)
        grid: The grid the data lives on
        alpha: Hoelder exponent used for the time-difference scaling

    Returns:
        Max of sup|g|, sup|first time difference|/dt,
        sup|second time difference|/dt^(1+alpha/2) and, in 2D, the sup of
        tangential second differences / h^2.
    """
    g = np.asarray(values, dtype=float)
    if g.size == 0:
        return 0.0
    terms = [np.max(np.abs(g))]
    dt = grid.dt
    if g.shape[0] > 1:
        d1 = np.diff(g, axis=0)
        terms.append(np.max(np.abs(d1)) / dt)
        if g.shape[0] > 2:
            terms.append(np.max(np.abs(np.diff(d1, axis=0))) / dt ** (1.0 + alpha / 2.0))
    if grid.dim == 2:
        for axis, block in _faces(grid):
            face = g[:, block]
            if face.shape[1] > 2:
                tangential = 1 - axis
                d2 = face[:, :-2] - 2.0 * face[:, 1:-1] + face[:, 2:]
                terms.append(np.max(np.abs(d2)) / grid.h[tangential] ** 2)
    return float(max(terms))


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """The normalized cutoff chi = delta2 on [delta1, T] x dOmega."""
    grid: SpaceTimeGrid
    delta1: float
    delta2: float
    values: np.ndarray
    norm_surrogate: float
    epsilon: float

    def scaled(self, lam: float) -> np.ndarray:
        """Dirichlet data lam * chi."""
        return lam * self.values

    def on(self, grid: SpaceTimeGrid) -> "BoundaryProfile":
        """Restriction to a truncated grid with the same time step."""
        if grid is self.grid:
            return self
        return BoundaryProfile(
            grid, self.delta1, self.delta2, self.values[: grid.n_levels],
            self.norm_surrogate, self.epsilon,
        )


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Boundary perturbation h in B_epsilon."""
    values: np.ndarray
    norm_surrogate: float
    epsilon: float
    shape: str = "custom"

    def l2_norm(self, grid: SpaceTimeGrid) -> float:
        return grid.boundary_l2(self.values)

    def scaled(self, s: float) -> np.ndarray:
        return s * self.values


def build_chi(grid: SpaceTimeGrid, delta1: float, delta2_initial: float,
              epsilon: float = 0.1, horizon: Optional[float] = None) -> BoundaryProfile:
    """
    Build the cutoff chi(t, x) = delta2 * S(t / delta1), constant along the boundary.

    The plateau value is fixed by normalizing the surrogate norm to 1, so the
    result does not depend on delta2_initial.

    Args:
        grid: Space-time grid
        delta1: End of the ramp; must satisfy 0 < delta1 < T1
        delta2_initial: Positive plateau value before normalization
        epsilon: Radius of the perturbation ball stored on the profile
        horizon: T1 (defaults to the grid's final time)

    Returns:
        The normalized BoundaryProfile
    """
    t1 = grid.T if horizon is None else horizon
    if not 0 < delta1 < t1:
        raise ValueError(f"delta1={delta1} must lie in (0, T1={t1})")
    if delta2_initial <= 0:
        raise ValueError(f"delta2_initial must be positive, got {delta2_initial}")
    if grid.dt > delta1 / 4:
        raise ValueError(f"dt={grid.dt} too coarse to resolve the ramp of length {delta1}")
    ramp = smoothstep(grid.times / delta1)
    unit = np.repeat(ramp[:, None], grid.n_boundary, axis=1)
    unit_norm = discrete_holder_surrogate(unit, grid)
    delta2 = 1.0 / unit_norm
    values = delta2 * unit
    values.setflags(write=False)
    norm = discrete_holder_surrogate(values, grid)
    logger.info(
        f"Built chi: delta1={delta1}, delta2={delta2:.6g} "
        f"(unnormalized norm {delta2_initial * unit_norm:.6g}), surrogate norm {norm:.15g}"
    )
    return BoundaryProfile(grid, float(delta1), float(delta2), values, norm, float(epsilon))


def _onset_profile(grid: SpaceTimeGrid) -> np.ndarray:
    """Normalized time for perturbations; zero on the first two levels."""
    t_on = grid.dt
    return np.clip((grid.times - t_on) / (grid.T - t_on), 0.0, 1.0)


def _boundary_arclength(grid: SpaceTimeGrid) -> np.ndarray:
    """Position of each boundary node along the perimeter (2D only)."""
    x, y = grid.boundary_coords
    lx, ly = grid.extents
    b = grid.boundary
    s = np.empty(len(b))
    for k, (axis, sign) in enumerate(zip(b.normal_axis, b.normal_sign)):
        if axis == 1 and sign < 0:
            s[k] = x[k]
        elif axis == 0 and sign > 0:
            s[k] = lx + y[k]
        elif axis == 1 and sign > 0:
            s[k] = lx + ly + (lx - x[k])
        else:
            s[k] = 2 * lx + ly + (ly - y[k])
    return s


def _shape_values(grid: SpaceTimeGrid, shape: str, seed: int, node: int) -> np.ndarray:
    tau = _onset_profile(grid)
    nb = grid.n_boundary
    if shape == "time_bump":
        return np.repeat((np.sin(np.pi * tau) ** 2)[:, None], nb, axis=1)
    if shape == "boundary_bump":
        if not 0 <= node < nb:
            raise ValueError(f"boundary node {node} out of range (0..{nb - 1})")
        if grid.dim == 1:
            weights = np.zeros(nb)
            weights[node] = 1.0
        else:
            s = _boundary_arclength(grid)
            perimeter = 2 * sum(grid.extents)
            d = np.abs(s - s[node])
            d = np.minimum(d, perimeter - d)
            width = 0.15 * min(grid.extents)
            weights = np.exp(-(d / width) ** 2)
        return np.outer(np.sin(np.pi * tau) ** 2, weights)
    if shape == "random_smooth":
        rng = np.random.default_rng(seed)
        values = np.zeros((grid.n_levels, nb))
        if grid.dim == 2:
            perimeter = 2 * sum(grid.extents)
            s = _boundary_arclength(grid) * 2 * np.pi / perimeter
        for k in range(1, 4):
            temporal = np.sin(k * np.pi * tau / 2.0) ** 2
            if grid.dim == 1:
                weights = rng.standard_normal(nb)
            else:
                weights = np.zeros(nb)
                for m in range(3):
                    a, c = rng.standard_normal(2)
                    weights += a * np.cos(m * s) + c * np.sin(m * s)
            values += rng.standard_normal() * np.outer(temporal, weights)
        return values
    raise ValueError(f"unknown perturbation shape '{shape}'; expected one of {PERTURBATION_SHAPES}")


def make_perturbation(grid: SpaceTimeGrid, shape: str, amplitude: float, epsilon: float,
                      seed: int = 0, node: int = 0) -> Perturbation:
    """
    Build a perturbation h whose surrogate norm equals the requested amplitude.

    Args:
        grid: Space-time grid
        shape: One of time_bump, boundary_bump, random_smooth
        amplitude: Target surrogate norm of h
        epsilon: Radius of the ball B_epsilon
        seed: Seed for random_smooth
        node: Boundary node the boundary_bump is centered on

    Returns:
        The Perturbation

    Raises:
        PerturbationTooLarge: if the resulting norm exceeds epsilon
    """
    if amplitude < 0:
        raise ValueError(f"amplitude must be non-negative, got {amplitude}")
    if amplitude == 0:
        values = np.zeros((grid.n_levels, grid.n_boundary))
        return Perturbation(values, 0.0, float(epsilon), shape)
    unit = _shape_values(grid, shape, seed, node)
    unit_norm = discrete_holder_surrogate(unit, grid)
    values = unit * (amplitude / unit_norm)
    norm = discrete_holder_surrogate(values, grid)
    if norm > epsilon * (1 + 1e-12):
        logger.error(f"Rejected {shape} perturbation: norm {norm:.6g} > epsilon {epsilon:.6g}")
        raise PerturbationTooLarge(norm, epsilon)
    values.setflags(write=False)
    return Perturbation(values, norm, float(epsilon), shape)


def random_probes(grid: SpaceTimeGrid, count: int, epsilon: float, seed: int) -> list:
    """Seeded family of random smooth perturbations of norm epsilon; probe k uses seed (seed, k)."""
    probes = []
    for k in range(count):
        probe_seed = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        probes.append(make_perturbation(grid, "random_smooth", epsilon, epsilon, seed=probe_seed))
    return probes
