"""
Tests for the time-stepping schemes and the linear and semilinear solvers.
"""
import sys
import os
import pytest
import numpy as np

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.discretization.boundary import build_chi
from dnlab.discretization.grid import build_grid
from dnlab.errors import SolverError
from dnlab.nonlinearity.terms import builtin_family
from dnlab.solver.linear import LinearProblem, ShiftPolicy, positivity_shifted_solve, shift_for, solve_linear
from dnlab.solver.semilinear import SemilinearProblem, SolverSettings, solve_semilinear
from dnlab.solver.stepping import Scheme, is_inverse_nonnegative, step_matrix_dense
from dnlab.utils.config import GridConfig
from dnlab.utils.performance import fit_slope


def make_grid(nx=19, nt=40, dim=1):
    return build_grid(GridConfig(dim=dim, extents=[1.0] * dim, nx=[nx] * dim, nt=nt, T=1.0))


@pytest.fixture
def grid():
    return make_grid()


@pytest.fixture
def chi(grid):
    return build_chi(grid, 0.2, 1.0)


def sine_mode_problem(grid, amplitude, rate):
    """u = a(t) sin(pi x) with source a' + pi^2 a; amplitude and rate give a and a'."""
    (x,) = grid.interior_coords
    mode = np.sin(np.pi * x)
    t = grid.times[:, None]
    source = (rate(t) + np.pi ** 2 * amplitude(t)) * mode[None, :]
    exact = amplitude(grid.times[-1]) * mode
    return LinearProblem(grid, source=source), exact


class TestStepMatrix:
    """Algebraic properties of one implicit step."""

    def test_scheme_theta(self):
        assert Scheme("implicit_euler").theta == 1.0
        assert Scheme("crank_nicolson").theta == 0.5

    def test_m_matrix_has_nonnegative_inverse(self):
        grid = make_grid(nx=7, nt=10)
        assert is_inverse_nonnegative(step_matrix_dense(grid, 0.0, grid.dt))
        assert is_inverse_nonnegative(step_matrix_dense(grid, np.linspace(0.0, 5.0, 7), grid.dt))

    def test_negative_diagonal_breaks_positivity(self):
        grid = make_grid(nx=3, nt=10)
        assert not is_inverse_nonnegative(step_matrix_dense(grid, -50.0, grid.dt))

    def test_2d_m_matrix(self):
        grid = make_grid(nx=4, nt=10, dim=2)
        assert is_inverse_nonnegative(step_matrix_dense(grid, 1.0, grid.dt))


class TestLinearSolver:
    """Linear problems with manufactured solutions."""

    def test_zero_data(self, grid):
        u = solve_linear(LinearProblem(grid))
        assert u.sup_norm() == 0.0

    def test_boundary_rows_hold_data(self, grid, chi):
        u = solve_linear(LinearProblem(grid, dirichlet=chi.values))
        assert np.array_equal(u.boundary(), chi.values)

    @pytest.mark.parametrize("scheme", ["implicit_euler", "crank_nicolson"])
    def test_manufactured_solution(self, scheme):
        grid = make_grid()
        problem, exact = sine_mode_problem(grid, lambda t: t, lambda t: np.ones_like(t))
        u = solve_linear(problem, scheme)
        assert np.max(np.abs(u.interior(grid.nt) - exact)) < 1e-2

    def test_spatial_order(self):
        errors, steps = [], []
        for nx in (19, 39):
            grid = make_grid(nx=nx, nt=20)
            problem, exact = sine_mode_problem(grid, lambda t: t, lambda t: np.ones_like(t))
            u = solve_linear(problem)
            errors.append(np.max(np.abs(u.interior(grid.nt) - exact)))
            steps.append(grid.h[0])
        assert 1.8 < fit_slope(steps, errors) < 2.2

    @pytest.mark.parametrize("scheme, low, high", [("implicit_euler", 0.8, 1.2), ("crank_nicolson", 1.7, 2.3)])
    def test_temporal_order(self, scheme, low, high):
        def final_value(nt):
            grid = make_grid(nx=19, nt=nt)
            problem, _ = sine_mode_problem(grid, lambda t: np.sin(2 * t), lambda t: 2 * np.cos(2 * t))
            return solve_linear(problem, scheme).interior(nt)

        reference = final_value(1280)
        steps = [1 / 20, 1 / 40, 1 / 80]
        errors = [np.max(np.abs(final_value(int(round(1 / dt))) - reference)) for dt in steps]
        assert low < fit_slope(steps, errors) < high


class TestShiftedSolve:
    """Exponential shift keeping the step matrices monotone."""

    def test_shift_policies(self, grid):
        p = LinearProblem(grid, potential=-5.0)
        assert shift_for(p, ShiftPolicy.SUP) == pytest.approx(5.0)
        assert shift_for(p, ShiftPolicy.MINIMAL) == 0.0
        strong = LinearProblem(grid, potential=-100.0)
        assert shift_for(strong, "minimal") == pytest.approx(100.0)

    def test_minimal_shift_matches_plain_solve(self, grid, chi):
        p = LinearProblem(grid, potential=-5.0, dirichlet=chi.values)
        assert np.array_equal(positivity_shifted_solve(p, ShiftPolicy.MINIMAL).values, solve_linear(p).values)

    def test_sup_shift_is_nonnegative(self, grid, chi):
        p = LinearProblem(grid, potential=-5.0, dirichlet=chi.values)
        u = positivity_shifted_solve(p, ShiftPolicy.SUP)
        assert np.min(u.values) >= 0.0
        assert np.array_equal(u.boundary(), chi.values)

    def test_strong_negative_potential(self, grid, chi):
        p = LinearProblem(grid, potential=-100.0, dirichlet=chi.values)
        u = positivity_shifted_solve(p, ShiftPolicy.MINIMAL)
        assert np.min(u.values) >= 0.0

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("policy", ["sup", "minimal"])
    def test_random_potentials_stay_nonnegative(self, grid, chi, seed, policy):
        rng = np.random.default_rng(seed)
        bound = rng.uniform(1.0, 200.0)
        V = rng.uniform(-bound, bound, (grid.n_levels,) + grid.interior_shape)
        g = chi.values * rng.uniform(0.0, 2.0, chi.values.shape)
        u = positivity_shifted_solve(LinearProblem(grid, potential=V, dirichlet=g), policy)
        assert np.min(u.values) >= -1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_larger_potential_gives_smaller_solution(self, grid, chi, seed):
        rng = np.random.default_rng(100 + seed)
        shape = (grid.n_levels,) + grid.interior_shape
        V2 = rng.uniform(-15.0, 15.0, shape)
        V1 = V2 + rng.uniform(0.0, 5.0, shape)
        u1 = positivity_shifted_solve(LinearProblem(grid, potential=V1, dirichlet=chi.values), ShiftPolicy.MINIMAL)
        u2 = positivity_shifted_solve(LinearProblem(grid, potential=V2, dirichlet=chi.values), ShiftPolicy.MINIMAL)
        assert np.all(u1.values <= u2.values + 1e-12)


class TestSemilinearSolver:
    """Newton time stepping for the semilinear problem."""

    def test_zero_term_matches_linear(self, grid, chi):
        u, report = solve_semilinear(SemilinearProblem(grid, builtin_family("zero"), chi.values))
        expected = solve_linear(LinearProblem(grid, dirichlet=chi.values))
        assert np.allclose(u.values, expected.values, atol=1e-12)
        assert len(report.newton_iterations) == grid.nt
        assert not report.blowup_flag

    def test_linear_term_matches_potential(self, grid, chi):
        F = builtin_family("linear_potential", {"q": 2.0})
        u, _ = solve_semilinear(SemilinearProblem(grid, F, 3.0 * chi.values))
        expected = solve_linear(LinearProblem(grid, potential=2.0, dirichlet=3.0 * chi.values))
        assert np.allclose(u.values, expected.values, atol=1e-10)

    def test_zero_data_gives_zero(self, grid):
        zero = np.zeros((grid.n_levels, grid.n_boundary))
        u, report = solve_semilinear(SemilinearProblem(grid, builtin_family("cubic_absorbing"), zero))
        assert u.sup_norm() == 0.0
        assert report.total_iterations == 0

    def test_odd_symmetry(self, grid, chi):
        F = builtin_family("cubic_absorbing")
        up, _ = solve_semilinear(SemilinearProblem(grid, F, chi.values))
        down, _ = solve_semilinear(SemilinearProblem(grid, F, -chi.values))
        assert np.allclose(up.values, -down.values, atol=1e-9)

    def test_crank_nicolson_close_to_implicit_euler(self, grid, chi):
        F = builtin_family("cubic_absorbing")
        a, _ = solve_semilinear(SemilinearProblem(grid, F, chi.values), "implicit_euler")
        b, report = solve_semilinear(SemilinearProblem(grid, F, chi.values), "crank_nicolson")
        assert report.scheme == "crank_nicolson"
        assert np.max(np.abs(a.values - b.values)) < 0.5 * chi.delta2

    def test_2d_solve(self):
        grid = make_grid(nx=7, nt=20, dim=2)
        chi = build_chi(grid, 0.25, 1.0)
        u, report = solve_semilinear(SemilinearProblem(grid, builtin_family("power_law_fnon"), chi.values))
        assert u.is_finite()
        assert report.max_residual <= 1e-10

    def test_incompatible_initial_data(self, grid):
        g = np.ones((grid.n_levels, grid.n_boundary))
        with pytest.raises(ValueError):
            SemilinearProblem(grid, builtin_family("zero"), g)

    def test_blowup_raises(self, grid, chi):
        settings = SolverSettings(blowup_cap=1.0)
        problem = SemilinearProblem(grid, builtin_family("cubic_absorbing"), (5.0 / chi.delta2) * chi.values)
        with pytest.raises(SolverError) as excinfo:
            solve_semilinear(problem, settings=settings)
        assert excinfo.value.report is not None

    def test_blowup_reported(self, grid, chi):
        settings = SolverSettings(blowup_cap=1.0)
        problem = SemilinearProblem(grid, builtin_family("cubic_absorbing"), (5.0 / chi.delta2) * chi.values)
        u, report = solve_semilinear(problem, settings=settings, raise_on_failure=False)
        assert report.blowup_flag
        level = report.first_offending_level
        assert level is not None
        assert np.all(np.isnan(u.values[level:]))
        assert np.all(np.isfinite(u.values[:level]))

    def test_truncated_horizon(self, grid, chi):
        problem = SemilinearProblem(grid, builtin_family("cubic_absorbing"), chi.values, horizon=0.5)
        u, _ = solve_semilinear(problem)
        assert u.grid.nt == 20


if __name__ == "__main__":
    pytest.main([__file__])
