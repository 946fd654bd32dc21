"""
Discretization package: grids, fields and lateral boundary data.
"""
from .grid import Field, SpaceTimeGrid, build_grid, laplacian_apply, normal_derivative
from .boundary import (
    BoundaryProfile,
    Perturbation,
    build_chi,
    discrete_holder_surrogate,
    make_perturbation,
    random_probes,
)

__all__ = [
    "Field",
    "SpaceTimeGrid",
    "build_grid",
    "laplacian_apply",
    "normal_derivative",
    "BoundaryProfile",
    "Perturbation",
    "build_chi",
    "discrete_holder_surrogate",
    "make_perturbation",
    "random_probes",
]
