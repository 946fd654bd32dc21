"""
Tests for the stability sweep over F1 + eps * P.
"""
import sys
import os
import json
import pytest
import tempfile
import numpy as np
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.discretization.boundary import build_chi
from dnlab.discretization.grid import build_grid
from dnlab.discretization.serialization import read_table
from dnlab.errors import HypothesisViolation
from dnlab.inverse.stability import StabilityRecord, StabilityRun, run_stability, sup_difference_on_box
from dnlab.nonlinearity.terms import builtin_family
from dnlab.utils.config import GridConfig


@pytest.fixture(scope="module")
def chi():
    grid = build_grid(GridConfig(dim=1, extents=[1.0], nx=[19], nt=40, T=1.0))
    return build_chi(grid, 0.2, 1.0)


@pytest.fixture(scope="module")
def cubic():
    return builtin_family("cubic_absorbing")


@pytest.fixture
def sample_run():
    records = [
        StabilityRecord(0.1, 1e-3, 1e-4, [5e-5, 1e-4], 0.5, [-1.0, 1.0]),
        StabilityRecord(0.2, 2e-3, 3e-4, [2e-4, 3e-4], 0.4, [-1.0, 1.0]),
    ]
    return StabilityRun(scenario="sample", seed=1, records=records, half_width=0.05,
                        spearman_rho=1.0, fit_slope=-2.0, fit_intercept=0.0)


class TestSupDifference:
    """Gap of two terms on the valid box."""

    def test_same_term(self, cubic, chi):
        assert sup_difference_on_box(cubic, cubic, chi, 0.1) == 0.0

    def test_scaled_cubic(self, cubic, chi):
        stronger = builtin_family("cubic_absorbing", {"c": 2.0})
        gap = sup_difference_on_box(cubic, stronger, chi, 0.1)
        assert gap == pytest.approx(0.1 ** 3, rel=1e-12)


class TestRunStability:
    """The epsilon sweep."""

    def test_zero_epsilon_record(self, cubic, chi):
        run = run_stability(cubic, cubic, [0.0], chi, r=1.0, seed=0)
        (record,) = run.records
        assert record.sup_F_diff == 0.0
        assert record.dn_discrepancy == 0.0
        assert len(record.per_lambda) == 5
        assert np.isnan(run.spearman_rho)

    def test_rejects_negative_epsilon(self, cubic, chi):
        with pytest.raises(ValueError):
            run_stability(cubic, cubic, [0.1, -0.1], chi, r=1.0)

    def test_records_sorted_and_deterministic(self, cubic, chi):
        a = run_stability(cubic, cubic, [0.2, 0.0, 0.1], chi, r=1.0, seed=4)
        b = run_stability(cubic, cubic, [0.1, 0.2, 0.0], chi, r=1.0, seed=4, threads=2)
        assert [r.epsilon for r in a.records] == [0.0, 0.1, 0.2]
        for ra, rb in zip(a.records, b.records):
            assert ra.sup_F_diff == rb.sup_F_diff
            assert ra.dn_discrepancy == rb.dn_discrepancy
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)

    def test_hypothesis_violation(self, cubic, chi):
        logistic = builtin_family("logistic", {"rho": 1.0, "K": 4.0})
        with pytest.raises(HypothesisViolation):
            run_stability(cubic, logistic, [0.0, 1.0], chi, r=1.0)

    @pytest.mark.slow
    def test_trend(self, cubic, chi):
        run = run_stability(cubic, cubic, [0.1, 0.05, 0.025, 0.0125], chi, r=1.0, seed=0)
        assert run.spearman_rho >= 0.9
        diffs = [r.sup_F_diff for r in run.records]
        assert np.all(np.diff(diffs) > 0)
        assert np.isfinite(run.fit_slope)


class TestStabilityOutput:
    """Serialized stability runs."""

    def test_to_dict(self, sample_run):
        data = sample_run.to_dict()
        assert data["fit"]["theta"] == 2.0
        assert data["fit"]["constant"] == 1.0
        assert len(data["records"]) == 2
        json.dumps(data)

    def test_runtime_kept_out_of_records(self, sample_run):
        for record in sample_run.to_dict()["records"]:
            assert "runtime" not in record
        assert sample_run.runtimes() == {"0.1": 0.5, "0.2": 0.4}

    def test_write_csv(self, sample_run):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = sample_run.write_csv(Path(tmpdir) / "stability.csv")
            columns, rows = read_table(path)
            assert columns == ["epsilon", "sup_F_diff", "dn_discrepancy", "spearman_rho", "fit_slope", "fit_intercept"]
            assert rows.shape == (2, 6)
            assert rows[1, 0] == 0.2

    def test_write_long_csv(self, sample_run):
        pd = pytest.importorskip("pandas")
        with tempfile.TemporaryDirectory() as tmpdir:
            path = sample_run.write_long_csv(Path(tmpdir) / "stability_long.csv")
            frame = pd.read_csv(path)
            assert list(frame.columns) == ["epsilon", "lambda", "metric", "value"]
            assert len(frame) == 8
            assert set(frame["metric"]) == {"sup_F_diff", "dn_discrepancy", "dn_discrepancy_lambda"}


if __name__ == "__main__":
    pytest.main([__file__])
