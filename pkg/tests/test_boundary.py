"""
Tests for the cutoff profile, boundary perturbations and field serialization.
"""
import sys
import os
import pytest
import tempfile
import numpy as np
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.discretization.boundary import (
    build_chi,
    discrete_holder_surrogate,
    make_perturbation,
    random_probes,
    smoothstep,
)
from dnlab.discretization.grid import Field, build_grid
from dnlab.discretization.serialization import (
    field_to_csv,
    read_binary,
    read_table,
    write_binary,
    write_table,
)
from dnlab.errors import PerturbationTooLarge
from dnlab.utils.config import GridConfig


@pytest.fixture
def grid():
    return build_grid(GridConfig(dim=1, extents=[1.0], nx=[19], nt=40, T=1.0))


@pytest.fixture
def grid_2d():
    return build_grid(GridConfig(dim=2, extents=[1.0, 1.0], nx=[7, 7], nt=20, T=1.0))


class TestSmoothstep:
    """The ramp used by the cutoff."""

    def test_plateaus(self):
        assert smoothstep(0.0) == 0.0
        assert smoothstep(0.25) == 0.0
        assert smoothstep(1.0) == 1.0
        assert smoothstep(3.0) == 1.0

    def test_monotone(self):
        values = smoothstep(np.linspace(0.0, 1.2, 200))
        assert np.all(np.diff(values) >= 0.0)


class TestChi:
    """The normalized cutoff profile."""

    def test_normalized(self, grid):
        chi = build_chi(grid, 0.2, 1.0)
        assert chi.norm_surrogate == pytest.approx(1.0, rel=1e-12)
        assert discrete_holder_surrogate(chi.values, grid) == pytest.approx(1.0, rel=1e-12)

    def test_shape_and_plateau(self, grid):
        chi = build_chi(grid, 0.2, 1.0)
        assert chi.values.shape == (grid.n_levels, grid.n_boundary)
        assert np.all(chi.values[0] == 0.0)
        assert np.all(chi.values == chi.values[:, :1])
        after = grid.times >= 0.2
        assert np.allclose(chi.values[after], chi.delta2)
        assert 0 < chi.delta2 < 1

    def test_initial_plateau_is_irrelevant(self, grid):
        assert np.array_equal(build_chi(grid, 0.2, 1.0).values, build_chi(grid, 0.2, 5.0).values)

    def test_scaled(self, grid):
        chi = build_chi(grid, 0.2, 1.0)
        assert np.allclose(chi.scaled(-2.0), -2.0 * chi.values)

    def test_2d_constant_along_boundary(self, grid_2d):
        chi = build_chi(grid_2d, 0.25, 1.0)
        assert np.all(chi.values == chi.values[:, :1])
        assert chi.norm_surrogate == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("delta1, delta2", [(1.0, 1.0), (0.0, 1.0), (0.2, 0.0), (0.05, 1.0)])
    def test_rejects(self, grid, delta1, delta2):
        # the last case has dt = 0.025 > delta1 / 4
        with pytest.raises(ValueError):
            build_chi(grid, delta1, delta2)

    def test_restriction(self, grid):
        chi = build_chi(grid, 0.2, 1.0)
        short = grid.truncate(0.5)
        restricted = chi.on(short)
        assert restricted.values.shape == (short.n_levels, short.n_boundary)
        assert chi.on(grid) is chi


class TestPerturbations:
    """Boundary perturbations in the epsilon ball."""

    @pytest.mark.parametrize("shape", ["time_bump", "boundary_bump", "random_smooth"])
    def test_norm_matches_amplitude(self, grid, shape):
        h = make_perturbation(grid, shape, 0.05, 0.1, seed=4)
        assert h.norm_surrogate == pytest.approx(0.05, rel=1e-12)
        assert np.all(h.values[0] == 0.0)
        assert h.shape == shape

    def test_boundary_bump_2d(self, grid_2d):
        h = make_perturbation(grid_2d, "boundary_bump", 0.05, 0.1, node=3)
        peak = int(np.argmax(np.abs(h.values[-2])))
        assert peak == 3

    def test_zero_amplitude(self, grid):
        h = make_perturbation(grid, "time_bump", 0.0, 0.1)
        assert h.norm_surrogate == 0.0
        assert not np.any(h.values)

    def test_too_large(self, grid):
        with pytest.raises(PerturbationTooLarge) as excinfo:
            make_perturbation(grid, "time_bump", 0.2, 0.1)
        assert excinfo.value.norm == pytest.approx(0.2)

    def test_unknown_shape(self, grid):
        with pytest.raises(ValueError):
            make_perturbation(grid, "square_wave", 0.05, 0.1)

    def test_node_out_of_range(self, grid):
        with pytest.raises(ValueError):
            make_perturbation(grid, "boundary_bump", 0.05, 0.1, node=5)

    def test_probes_are_seeded(self, grid):
        a = random_probes(grid, 3, 0.1, seed=7)
        b = random_probes(grid, 3, 0.1, seed=7)
        c = random_probes(grid, 3, 0.1, seed=8)
        for p, q in zip(a, b):
            assert np.array_equal(p.values, q.values)
        assert not np.array_equal(a[0].values, c[0].values)
        assert not np.array_equal(a[0].values, a[1].values)
        for p in a:
            assert p.norm_surrogate == pytest.approx(0.1, rel=1e-12)


class TestSerialization:
    """CSV tables and the binary field format."""

    @pytest.fixture
    def workspace_dir(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            yield Path(tmpdir)

    def test_table_roundtrip_is_exact(self, workspace_dir):
        rows = np.random.default_rng(0).standard_normal((6, 3))
        path = write_table(workspace_dir / "table.csv", ["a", "b", "c"], rows)
        columns, loaded = read_table(path)
        assert columns == ["a", "b", "c"]
        assert np.array_equal(loaded, rows)

    def test_field_csv_rows(self, grid, workspace_dir):
        f = Field.from_function(grid, lambda t, x: t + x[0])
        path = field_to_csv(f, workspace_dir / "u.csv")
        columns, rows = read_table(path)
        assert columns[0] == "t"
        assert rows.shape[0] == grid.n_levels * grid.shape[0]

    def test_binary(self, grid, workspace_dir):
        f = Field.from_function(grid, lambda t, x: np.sin(t * x[0]))
        path = write_binary(f, workspace_dir / "u.pinv")
        assert np.array_equal(read_binary(path), f.values)

    def test_binary_bad_magic(self, workspace_dir):
        path = workspace_dir / "bad.pinv"
        path.write_bytes(b"NOPE0" + bytes(16))
        with pytest.raises(ValueError):
            read_binary(path)


if __name__ == "__main__":
    pytest.main([__file__])
