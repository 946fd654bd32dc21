"""
Solver package: semilinear Newton time stepping and linear parabolic solves.
"""
from .linear import LinearProblem, ShiftPolicy, positivity_shifted_solve, solve_linear
from .semilinear import SemilinearProblem, SolveReport, SolverSettings, solve_semilinear
from .stepping import Scheme, is_inverse_nonnegative, step_matrix_dense

__all__ = [
    "LinearProblem",
    "ShiftPolicy",
    "positivity_shifted_solve",
    "solve_linear",
    "SemilinearProblem",
    "SolveReport",
    "SolverSettings",
    "solve_semilinear",
    "Scheme",
    "is_inverse_nonnegative",
    "step_matrix_dense",
]
