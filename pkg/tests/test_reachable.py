"""
Tests for the reachable-set constants and the inversion of lambda -> v_lambda(t, x).
"""
import sys
import os
import pytest
import numpy as np

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.discretization.boundary import build_chi
from dnlab.discretization.grid import Field, build_grid
from dnlab.errors import OutOfRange
from dnlab.inverse.linearize import build_bundle
from dnlab.inverse.reachable import compute_constants, invert_lambda, snap_to_node, window_minimum
from dnlab.nonlinearity.terms import builtin_family
from dnlab.utils.config import GridConfig


@pytest.fixture(scope="module")
def chi():
    grid = build_grid(GridConfig(dim=1, extents=[1.0], nx=[19], nt=40, T=1.0))
    return build_chi(grid, 0.2, 1.0)


@pytest.fixture(scope="module")
def cubic_bundle(chi):
    return build_bundle(builtin_family("cubic_absorbing"), chi, r=1.0, n_lambda=5)


@pytest.fixture(scope="module")
def linear_bundle(chi):
    return build_bundle(builtin_family("linear_potential", {"q": -1.0}), chi, r=1.0, n_lambda=5)


class TestConstants:
    """Window minima of the auxiliary solutions."""

    def test_heat_case_coincides(self, chi):
        constants = compute_constants(0.0, 0.0, chi)
        assert constants.a1 == constants.a2
        assert 0.0 < constants.a1 < chi.delta2
        assert constants.window == (0.2, 1.0)
        assert constants.a1_full_horizon is None

    def test_larger_kappa_lowers_a2(self, chi):
        a2 = [compute_constants(0.0, kappa, chi).a2 for kappa in (0.0, 1.0, 10.0)]
        assert a2[0] >= a2[1] >= a2[2] > 0.0

    def test_rejects_negative_kappa(self, chi):
        with pytest.raises(ValueError):
            compute_constants(0.0, -1.0, chi)
        with pytest.raises(ValueError):
            compute_constants(0.0, float("inf"), chi)

    def test_callable_potential(self, chi):
        constant = compute_constants(0.5, 0.0, chi)
        varying = compute_constants(lambda t, x: 0.5 + 0 * x[0], 0.0, chi)
        assert varying.a1 == pytest.approx(constant.a1, rel=1e-12)

    def test_threads(self, chi):
        serial = compute_constants(1.0, 2.0, chi)
        threaded = compute_constants(1.0, 2.0, chi, threads=2)
        assert threaded.a1 == serial.a1
        assert threaded.a2 == serial.a2

    def test_truncated_horizon(self, chi):
        constants = compute_constants(0.0, 1.0, chi, horizon=0.5)
        assert constants.window == (0.2, 0.5)
        assert constants.a1_full_horizon is not None
        assert constants.to_dict()["a1_full_horizon"] == constants.a1_full_horizon

    def test_first_order_dominates_w(self, chi, linear_bundle):
        # dF/du(0) = -1 <= q = 0, so the first-order solution at lambda=0 lies above w
        constants = compute_constants(0.0, 0.0, chi)
        v1 = linear_bundle.members[linear_bundle.zero_index].v1.values
        assert np.all(v1 >= constants.w.values - 1e-12)

    def test_a2_below_a1_when_kappa_dominates(self, chi):
        profile = lambda t, x: 2.0 * np.sin(np.pi * x[0]) + 0 * t  # noqa: E731
        for q, kappa0 in ((0.0, 0.0), (1.0, 1.0), (1.0, 4.0), (profile, 2.0), (profile, 5.0)):
            constants = compute_constants(q, kappa0, chi)
            assert constants.a2 <= constants.a1 + 1e-14

    def test_range_guarantee(self, chi, cubic_bundle):
        # dF/du = -3u^2 <= 0, so kappa(0) = 0 bounds every potential of the family
        constants = compute_constants(0.0, 0.0, chi)
        levels = chi.grid.window_levels(chi.delta1)
        r = cubic_bundle.r
        top = cubic_bundle.members[-1].v.interior()[levels]
        bottom = cubic_bundle.members[0].v.interior()[levels]
        assert np.min(top - constants.a2 * r) >= -1e-8
        assert np.min(-bottom - constants.a2 * r) >= -1e-8

    def test_solution_above_linear_response(self, cubic_bundle):
        v1_zero = cubic_bundle.members[cubic_bundle.zero_index].v1.values
        for lam, member in zip(cubic_bundle.lambda_grid, cubic_bundle.members):
            if lam >= 0:
                assert np.min(member.v.values - lam * v1_zero) >= -1e-8

    def test_window_minimum_location(self, chi):
        f = Field.from_function(chi.grid, lambda t, x: t + (x[0] - 0.5) ** 2)
        minimum = window_minimum(f, 0.2)
        assert minimum.t == pytest.approx(0.225)
        assert minimum.x == (pytest.approx(0.5),)
        with pytest.raises(ValueError):
            window_minimum(f, 1.0)


class TestInversion:
    """lambda as a function of the reachable value s."""

    def test_zero_value(self, cubic_bundle):
        result = invert_lambda(cubic_bundle, 0.5, 0.5, 0.0)
        assert result.lam == 0.0
        assert result.residual == 0.0

    def test_exact_grid_value(self, cubic_bundle):
        level, node = snap_to_node(cubic_bundle.grid, 0.5, 0.5)
        s = cubic_bundle.members[3].v.values[(level,) + node]
        result = invert_lambda(cubic_bundle, 0.5, 0.5, s)
        assert result.lam == 0.5

    def test_linear_closed_form(self, linear_bundle):
        level, node = snap_to_node(linear_bundle.grid, 0.5, 0.5)
        w = linear_bundle.members[linear_bundle.zero_index].v1.values[(level,) + node]
        result = invert_lambda(linear_bundle, 0.5, 0.5, 0.3 * w)
        assert result.lam == pytest.approx(0.3, abs=1e-8)
        assert result.bracket == (0.0, 0.5)

    def test_residual_small(self, cubic_bundle):
        level, node = snap_to_node(cubic_bundle.grid, 0.75, 0.25)
        top = cubic_bundle.members[-1].v.values[(level,) + node]
        for fraction in (-0.9, -0.2, 0.35, 0.8):
            result = invert_lambda(cubic_bundle, 0.75, 0.25, fraction * top)
            assert result.residual <= 1e-12
            assert -1.0 <= result.lam <= 1.0

    def test_monotone_in_s(self, cubic_bundle):
        level, node = snap_to_node(cubic_bundle.grid, 0.75, 0.25)
        top = cubic_bundle.members[-1].v.values[(level,) + node]
        lams = [invert_lambda(cubic_bundle, 0.75, 0.25, f * top).lam for f in np.linspace(-0.9, 0.9, 7)]
        assert np.all(np.diff(lams) > 0)

    def test_out_of_range(self, cubic_bundle):
        level, node = snap_to_node(cubic_bundle.grid, 0.5, 0.5)
        top = cubic_bundle.members[-1].v.values[(level,) + node]
        with pytest.raises(OutOfRange) as excinfo:
            invert_lambda(cubic_bundle, 0.5, 0.5, 2.0 * top)
        assert excinfo.value.witness["s"] == pytest.approx(2.0 * top)


if __name__ == "__main__":
    pytest.main([__file__])
