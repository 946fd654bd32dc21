"""
Implicit step matrices I + theta*dt*(-Laplacian + diag(c)) and their factorizations.

1D systems are tridiagonal and solved with scipy.linalg.solve_banded; 2D
systems are sparse and factorized once per matrix with splu.
"""
import logging
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, solve_banded
from scipy.sparse.linalg import splu

from ..discretization.grid import SpaceTimeGrid
from ..errors import SingularStepMatrix

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    """Time discretizations."""
    IMPLICIT_EULER = "implicit_euler"
    CRANK_NICOLSON = "crank_nicolson"

    @property
    def theta(self) -> float:
        """Weight of the new time level."""
        return 1.0 if self is Scheme.IMPLICIT_EULER else 0.5


def step_matrix(grid: SpaceTimeGrid, coefficient, theta_dt: float) -> sp.csc_matrix:
    """Sparse I + theta_dt * (-L + diag(coefficient)) on interior nodes."""
    c = np.broadcast_to(np.asarray(coefficient, dtype=float), (grid.n_interior,))
    identity = sp.identity(grid.n_interior, format="csr")
    return sp.csc_matrix(identity + theta_dt * (sp.diags(c) - grid.laplacian_matrix))


def step_matrix_dense(grid: SpaceTimeGrid, coefficient, dt: float) -> np.ndarray:
    """Dense implicit Euler step matrix, for brute-force checks on tiny grids."""
    return step_matrix(grid, coefficient, dt).toarray()


def is_inverse_nonnegative(matrix: np.ndarray, tol: float = 1e-14) -> bool:
    """True when every entry of the inverse is >= -tol (the M-matrix consequence)."""
    inverse = np.linalg.inv(np.asarray(matrix, dtype=float))
    smallest = float(np.min(inverse))
    logger.debug(f"Smallest entry of the step-matrix inverse: {smallest:.3e}")
    return smallest >= -tol


class StepOperator:
    """
    A factorized step matrix.

    Args:
        grid: Space-time grid
        coefficient: Diagonal coefficient per interior node (scalar or flat array)
        theta_dt: theta * dt of the scheme
        level: Time level the matrix belongs to, reported on failure
    """

    def __init__(self, grid: SpaceTimeGrid, coefficient, theta_dt: float, level: Optional[int] = None):
        self.grid = grid
        self.theta_dt = theta_dt
        self.level = level
        c = np.broadcast_to(np.asarray(coefficient, dtype=float), (grid.n_interior,))
        if not np.all(np.isfinite(c)):
            raise SingularStepMatrix("non-finite step-matrix coefficient", level=level)
        if grid.dim == 1:
            h2 = grid.h[0] ** 2
            n = grid.n_interior
            self._banded = np.zeros((3, n))
            self._banded[0, 1:] = -theta_dt / h2
            self._banded[1, :] = 1.0 + theta_dt * (2.0 / h2 + c)
            self._banded[2, :-1] = -theta_dt / h2
            self._lu = None
        else:
            self._banded = None
            try:
                self._lu = splu(step_matrix(grid, c, theta_dt))
            except RuntimeError as e:
                logger.error(f"Step matrix at level {level} is singular: {e}")
                raise SingularStepMatrix(f"step matrix is singular: {e}", level=level)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._banded is not None:
            try:
                out = solve_banded((1, 1), self._banded, rhs, check_finite=False)
            except (LinAlgError, ValueError) as e:
                logger.error(f"Step matrix at level {self.level} is singular: {e}")
                raise SingularStepMatrix(f"step matrix is singular: {e}", level=self.level)
        else:
            out = self._lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SingularStepMatrix("step solve produced non-finite values", level=self.level)
        return out


def apply_operator(grid: SpaceTimeGrid, coefficient, u: np.ndarray) -> np.ndarray:
    """(-L + diag(coefficient)) u on interior nodes, homogeneous boundary folded out."""
    c = np.broadcast_to(np.asarray(coefficient, dtype=float), (grid.n_interior,))
    return c * u - grid.laplacian_matrix @ u
