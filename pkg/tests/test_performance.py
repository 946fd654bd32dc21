"""
Tests for convergence measurement and timing.
"""
import sys
import os
import time
import pytest
import tempfile
import numpy as np
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.utils.performance import ConvergenceStudy, PerformanceTimer, compare_studies, fit_slope, observed_orders


class TestOrders:
    """Log-log slopes of refinement data."""

    def test_exact_power_law(self):
        steps = [0.1, 0.05, 0.025]
        assert fit_slope(steps, [s ** 2 for s in steps]) == pytest.approx(2.0)
        assert observed_orders(steps, [3 * s for s in steps]) == [pytest.approx(1.0), pytest.approx(1.0)]

    def test_drops_non_positive(self):
        assert fit_slope([0.1, 0.05, 0.025], [0.0, 0.05, 0.025]) == pytest.approx(1.0)
        assert np.isnan(fit_slope([0.1, 0.05], [0.0, 1.0]))

    def test_zero_error_pair(self):
        orders = observed_orders([0.1, 0.05, 0.025], [1e-3, 0.0, 1e-5])
        assert all(np.isnan(orders))


class TestConvergenceStudy:
    """Saving and comparing refinement studies."""

    @pytest.fixture
    def studies_dir(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            yield tmpdir

    def make_study(self, name, order):
        study = ConvergenceStudy(name)
        for step in (0.2, 0.1, 0.05):
            study.add(step, step ** order)
        return study

    def test_properties(self):
        study = self.make_study("quadratic", 2)
        assert study.slope == pytest.approx(2.0)
        data = study.to_dict()
        assert data["slope"] == pytest.approx(2.0)
        assert len(data["orders"]) == 2

    def test_save_and_load(self, studies_dir):
        study = self.make_study("linear", 1)
        file_path = study.save(studies_dir)
        assert file_path != ""
        assert Path(file_path).exists()
        loaded = ConvergenceStudy.load(file_path)
        assert loaded.steps == study.steps
        with open(file_path) as f:
            first = f.read()
        study.save(studies_dir)
        with open(file_path) as f:
            assert f.read() == first

    def test_compare(self, studies_dir):
        files = [self.make_study("first", 1).save(studies_dir), self.make_study("second", 2).save(studies_dir)]
        comparison = compare_studies(files + [os.path.join(studies_dir, "missing.json")])
        assert comparison["total_studies"] == 2
        assert comparison["min_slope"] == pytest.approx(1.0)
        assert comparison["max_slope"] == pytest.approx(2.0)
        assert set(comparison["studies"]) == {"first", "second"}

    def test_compare_nothing(self, studies_dir):
        assert compare_studies([os.path.join(studies_dir, "missing.json")]) == {}


class TestPerformanceTimer:
    """Test the performance timer."""

    def test_timer(self):
        timer = PerformanceTimer()
        assert timer.elapsed_time() == 0.0
        timer.start()
        time.sleep(0.01)
        elapsed = timer.stop()
        assert 0.0 < elapsed < 1.0

    def test_context_manager(self):
        with PerformanceTimer() as timer:
            time.sleep(0.01)
        assert timer.elapsed_time() > 0.0


if __name__ == "__main__":
    pytest.main([__file__])
