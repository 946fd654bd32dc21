"""
Tests for the semilinear term families and the hypothesis checks.
"""
import sys
import os
import pytest
import tempfile
import numpy as np
from dataclasses import replace
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.discretization.grid import build_grid
from dnlab.errors import HypothesisViolation
from dnlab.nonlinearity.hypotheses import (
    HypothesisStatus,
    check_all,
    check_derivatives,
    check_p1,
    check_p2,
    check_p3,
    check_t1a,
    check_t1b,
    check_t1d,
    check_t2a,
    estimate_kappa0,
)
from dnlab.nonlinearity.terms import SemilinearTerm, TabulatedTerm, builtin_family, make_coefficient
from dnlab.utils.config import GridConfig

X = (np.array(0.5),)


@pytest.fixture
def grid():
    return build_grid(GridConfig(dim=1, extents=[1.0], nx=[19], nt=20, T=1.0))


class TestFamilies:
    """Values and derivatives of the builtin families."""

    def test_zero(self):
        F = builtin_family("zero")
        assert np.all(F(0.3, X, np.linspace(-1, 1, 5)) == 0.0)

    def test_cubic(self):
        F = builtin_family("cubic_absorbing", {"c": 1.0})
        assert F.f(0.0, X, 2.0) == pytest.approx(-8.0)
        assert F.du(0.0, X, 2.0) == pytest.approx(-12.0)
        assert F.d2u(0.0, X, 2.0) == pytest.approx(-12.0)
        assert F.metadata.satisfies_t1b
        assert F.metadata.odd

    def test_linear_potential(self):
        F = builtin_family("linear_potential", {"q": 2.5})
        assert F.f(0.0, X, 2.0) == pytest.approx(5.0)
        assert F.du(0.0, X, -7.0) == pytest.approx(2.5)
        assert F.metadata.kappa0 == pytest.approx(2.5)

    def test_logistic(self):
        F = builtin_family("logistic", {"rho": 1.0, "K": 4.0})
        assert F.f(0.0, X, 2.0) == pytest.approx(-1.0)
        assert F.d2u(0.0, X, 0.0) == pytest.approx(0.5)
        assert not F.metadata.satisfies_t1b

    def test_logistic_rejects_capacity(self):
        with pytest.raises(ValueError):
            builtin_family("logistic", {"K": 0.0})

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            builtin_family("quartic")


class TestPowerLaw:
    """The odd power-law term with a polynomial join near zero."""

    @pytest.fixture
    def fnon(self):
        return builtin_family("power_law_fnon", {"q": -1.0, "gamma": 3.0, "eps1": 1.0})

    def test_join_polynomial(self, fnon):
        assert fnon.params["slope_at_zero"] == pytest.approx(-6.0)
        u = np.linspace(-0.9, 0.9, 7)
        assert np.allclose(fnon.f(0.0, X, u), -6.0 * u - 2.0 * u ** 3)

    def test_outer_branches(self, fnon):
        assert fnon.f(0.0, X, 2.0) == pytest.approx(-27.0)
        assert fnon.f(0.0, X, -2.0) == pytest.approx(27.0)

    def test_continuity_at_join(self, fnon):
        for order in (fnon.f, fnon.du, fnon.d2u):
            assert order(0.0, X, 1.0 - 1e-9) == pytest.approx(order(0.0, X, 1.0 + 1e-9), abs=1e-6)

    def test_metadata(self, fnon):
        assert fnon.metadata.satisfies_t1b
        assert fnon.metadata.odd
        assert fnon.metadata.kappa0 == pytest.approx(6.0)

    def test_short_join_breaks_concavity(self):
        F = builtin_family("power_law_fnon", {"q": -1.0, "gamma": 3.0, "eps1": 0.2})
        assert not F.metadata.satisfies_t1b

    def test_single_coefficient_example(self):
        F = builtin_family("power_law_fnon", {"q": -1.0, "gamma": 2.0, "eps1": 0.5})
        assert F.params["q_plus"] == -1.0
        assert F.params["q_minus"] == 1.0
        u = np.array([0.5, 0.75, 2.0])
        assert np.allclose(F.f(0.0, X, u), -(1.0 + u) ** 2)
        assert np.allclose(F.f(0.0, X, -u), (1.0 + u) ** 2)
        assert F.f(0.0, X, 0.0) == 0.0

    def test_negative_q_minus_names_branches(self):
        with pytest.raises(ValueError, match="u <= -eps1"):
            builtin_family("power_law_fnon", {"q_minus": -1.0})

    @pytest.mark.parametrize("params", [{"gamma": 0.5}, {"q": 1.0}, {"eps1": 0.0}])
    def test_rejects(self, params):
        with pytest.raises(ValueError):
            builtin_family("power_law_fnon", params)


class TestComposition:
    """Sums, bumps and mirror images of terms."""

    def test_plus(self):
        F = builtin_family("cubic_absorbing").plus(builtin_family("linear_potential", {"q": 1.0}), 0.5)
        assert F.f(0.0, X, 2.0) == pytest.approx(-8.0 + 1.0)
        assert F.du(0.0, X, 2.0) == pytest.approx(-12.0 + 0.5)

    def test_with_bump(self, grid):
        base = builtin_family("cubic_absorbing")
        F = base.with_bump(center=3.0, width=1.0, amplitude=2.0)
        assert F.f(0.0, X, 3.0) == pytest.approx(-27.0 + 2.0 * np.exp(-1.0))
        assert F.f(0.0, X, 0.5) == pytest.approx(base.f(0.0, X, 0.5))
        assert F.metadata.satisfies_t1a
        assert not F.metadata.satisfies_t1b
        assert check_derivatives(F, grid, u_max=4.0).passed

    def test_with_bump_rejects_width(self):
        with pytest.raises(ValueError):
            builtin_family("zero").with_bump(1.0, 0.0, 1.0)

    def test_mirrored_odd_term(self):
        F = builtin_family("power_law_fnon")
        u = np.linspace(-3, 3, 13)
        assert np.allclose(F.mirrored().f(0.0, X, u), F.f(0.0, X, u))

    def test_mirrored_logistic(self):
        F = builtin_family("logistic", {"rho": 1.0, "K": 4.0})
        assert F.mirrored().f(0.0, X, 2.0) == pytest.approx(-F.f(0.0, X, -2.0))


class TestCoefficients:
    """Coefficient profiles."""

    def test_constant(self):
        c = make_coefficient(2.5)
        assert c.constant == 2.5
        assert c(0.0, X) == 2.5

    def test_sine(self):
        c = make_coefficient({"profile": "sine", "amplitude": 2.0})
        assert (c.lower, c.upper) == (0.0, 2.0)
        assert c(0.0, (np.array(0.5),)) == pytest.approx(2.0)

    def test_bump_peak(self):
        c = make_coefficient({"profile": "bump"})
        assert c(0.0, (np.array(0.5),)) == pytest.approx(1.0)
        assert c(0.0, (np.array(0.0),)) == pytest.approx(0.0)

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            make_coefficient({"profile": "sawtooth"})


class TestHypotheses:
    """Sampled hypothesis checks with witnesses."""

    def test_t1a(self, grid):
        report = check_t1a(builtin_family("cubic_absorbing"), grid)
        assert report.status("t1a") == HypothesisStatus.PASS

    def test_t1b_pass_and_fail(self, grid):
        assert check_t1b(builtin_family("cubic_absorbing"), grid, 2.0).passed
        report = check_t1b(builtin_family("logistic", {"rho": 1.0, "K": 4.0}), grid, 2.0)
        result = report.results["t1b"]
        assert result.status == HypothesisStatus.FAIL
        assert result.witness["u"] >= 0.0
        assert result.witness["value"] == pytest.approx(0.5)

    def test_t1b_rejects_range(self, grid):
        with pytest.raises(ValueError):
            check_t1b(builtin_family("zero"), grid, 0.0)

    def test_t1d(self, grid):
        F = builtin_family("linear_potential", {"q": 2.0})
        assert check_t1d(F, 2.0, grid).passed
        assert not check_t1d(F, 1.0, grid).passed

    def test_p1_pass_and_fail(self, grid):
        cubic = builtin_family("cubic_absorbing")
        assert check_p1(cubic, grid, 2.0).status("P1") == HypothesisStatus.PASS
        loose = replace(cubic, metadata=replace(cubic.metadata, mu=lambda s: 0.5 * np.asarray(s) ** 3))
        result = check_p1(loose, grid, 2.0).results["P1"]
        assert result.status == HypothesisStatus.FAIL
        assert result.worst_value == pytest.approx(4.0)
        assert abs(result.witness["u"]) == pytest.approx(2.0)
        assert abs(result.witness["value"]) == pytest.approx(8.0)

    def test_p2_pass_and_fail(self, grid):
        assert check_p2(builtin_family("cubic_absorbing"), grid).status("P2") == HypothesisStatus.PASS
        offset = SemilinearTerm(
            "offset",
            f=lambda t, x, u: np.asarray(x[0]) + u,
            du=lambda t, x, u: np.ones_like(np.asarray(u, dtype=float)),
            d2u=lambda t, x, u: np.zeros_like(np.asarray(u, dtype=float)),
        )
        result = check_p2(offset, grid).results["P2"]
        assert result.status == HypothesisStatus.FAIL
        assert result.worst_value == pytest.approx(1.0)
        assert result.witness["x"] == [pytest.approx(1.0)]
        assert result.witness["t"] == 0.0

    def test_p3_pass_and_fail(self, grid):
        F = builtin_family("linear_potential", {"q": -2.0})
        assert check_p3(F, grid, 2.0).status("P3") == HypothesisStatus.PASS
        weak = replace(F, metadata=replace(F.metadata, b1=1.0))
        result = check_p3(weak, grid, 2.0).results["P3"]
        assert result.status == HypothesisStatus.FAIL
        assert result.worst_value == pytest.approx(4.0)
        assert abs(result.witness["u"]) == pytest.approx(2.0)
        assert check_p3(builtin_family("cubic_absorbing"), grid, 2.0).status("P3") == HypothesisStatus.NOT_CHECKED

    def test_t2a_pass_and_fail(self, grid):
        F = builtin_family("linear_potential", {"q": 3.0})
        assert check_t2a(F, grid).status("t2a") == HypothesisStatus.PASS
        understated = replace(F, metadata=replace(F.metadata, kappa0=1.0))
        result = check_t2a(understated, grid).results["t2a"]
        assert result.status == HypothesisStatus.FAIL
        assert result.worst_value == pytest.approx(2.0)
        assert result.witness == {"kappa0": 1.0, "sampled": pytest.approx(3.0)}
        varying = builtin_family("linear_potential", {"q": {"profile": "sine"}})
        assert check_t2a(varying, grid).status("t2a") == HypothesisStatus.NOT_CHECKED

    def test_require_raises_with_witness(self, grid):
        report = check_t1b(builtin_family("logistic", {"rho": 1.0, "K": 4.0}), grid, 1.0)
        with pytest.raises(HypothesisViolation) as excinfo:
            report.require("t1b")
        assert excinfo.value.witness is not None
        report.require("t1a")

    @pytest.mark.parametrize("name, params", [
        ("cubic_absorbing", {}),
        ("logistic", {"rho": 1.0, "K": 4.0}),
        ("power_law_fnon", {}),
        ("linear_potential", {"q": {"profile": "sine"}}),
    ])
    def test_derivatives_consistent(self, grid, name, params):
        report = check_derivatives(builtin_family(name, params), grid)
        assert report.status("consistency_du") == HypothesisStatus.PASS
        assert report.status("consistency_d2u") == HypothesisStatus.PASS

    def test_check_all(self, grid):
        report = check_all(builtin_family("cubic_absorbing"), grid)
        for name in ("t1a", "t1b", "t1d", "P1", "P2", "P3", "t2a", "consistency_du", "consistency_d2u"):
            assert name in report.results
        assert report.status("t1d") == HypothesisStatus.NOT_CHECKED
        assert report.status("P3") == HypothesisStatus.NOT_CHECKED
        assert report.passed
        assert report.to_dict()["term"] == "cubic_absorbing"

    def test_kappa0_of_constant_potential(self, grid):
        assert estimate_kappa0(builtin_family("linear_potential", {"q": 3.0}), grid) == pytest.approx(3.0)


class TestTabulated:
    """Terms loaded from an npz table."""

    @pytest.fixture
    def table_path(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            t = np.array([0.0, 1.0])
            x = np.array([0.0, 0.5, 1.0])
            u = np.linspace(-2.0, 2.0, 9)
            F = np.broadcast_to(3.0 * u, (2, 3, 9)).copy()
            path = Path(tmpdir) / "table.npz"
            np.savez(path, t=t, x=x, u=u, F=F)
            yield path

    def test_interpolates_linear_table(self, table_path):
        F = TabulatedTerm.from_npz(table_path).as_term()
        assert float(F.f(0.3, (0.7,), 0.5)) == pytest.approx(1.5)
        assert float(F.du(0.3, (0.7,), -1.25)) == pytest.approx(3.0)
        assert F.metadata.satisfies_t1a
        assert F.metadata.satisfies_t1b

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            TabulatedTerm(np.zeros(2), (np.zeros(3),), np.zeros(4), np.zeros((2, 3, 5)))


if __name__ == "__main__":
    pytest.main([__file__])
