"""
Tests for scenario configuration loading and validation.
"""
import sys
import os
import json
import pytest
import tempfile
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dnlab.errors import ConfigError
from dnlab.pipeline.scenarios import get_scenario, list_scenarios
from dnlab.utils.config import GridConfig, ScenarioConfig, ScenarioLoader, default_output_root


class TestScenarioConfig:
    """Schema defaults and validation."""

    def test_defaults_validate(self):
        config = ScenarioConfig().validate()
        assert config.experiment == "forward"
        assert config.tolerances.newton_tol == 1e-10
        assert config.horizon_value == config.grid.T

    def test_scalar_grid_entries(self):
        grid = GridConfig(dim=2, extents=1.0, nx=9)
        assert grid.extents == [1.0, 1.0]
        assert grid.nx == [9, 9]

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"grid": {"dim": 1, "spacing": 0.1}})
        assert excinfo.value.key == "grid.spacing"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"colour": "blue"})
        assert excinfo.value.key == "scenario.colour"

    @pytest.mark.parametrize("data, key", [
        ({"experiment": "transcribe"}, "experiment"),
        ({"scheme": "explicit"}, "scheme"),
        ({"grid": {"dim": 3}}, "grid.dim"),
        ({"chi": {"delta1": 1.5}}, "chi.delta1"),
        ({"chi": {"delta1": 0.5}, "horizon": 0.4}, "chi.delta1"),
        ({"horizon": 2.0}, "horizon"),
        ({"chi": {"epsilon": 1.0}}, "chi.epsilon"),
        ({"tolerances": {"margin": 1.0}}, "tolerances.margin"),
        ({"n_lambda": 20}, "n_lambda"),
        ({"n_lambda": 3}, "n_lambda"),
        ({"r": 0.0}, "r"),
        ({"threads": 0}, "threads"),
        ({"alpha": 1.0}, "alpha"),
        ({"experiment": "stability", "options": {"probe_count": 4}}, "options.probe_count"),
    ])
    def test_validation_keys(self, data, key):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict(data).validate()
        assert excinfo.value.key == key
        assert excinfo.value.to_dict()["key"] == key

    def test_hash_ignores_output_dir_and_threads(self):
        a = ScenarioConfig(output_dir="a", threads=1)
        b = ScenarioConfig(output_dir="b", threads=4)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != ScenarioConfig(seed=1).config_hash()

    def test_output_root_from_environment(self, monkeypatch):
        monkeypatch.setenv("DNLAB_OUTPUT_ROOT", "/tmp/dnlab-runs")
        assert default_output_root() == Path("/tmp/dnlab-runs")
        monkeypatch.delenv("DNLAB_OUTPUT_ROOT")
        assert default_output_root() == Path("runs")


class TestScenarioLoader:
    """JSON scenario files."""

    @pytest.fixture
    def temp_dir(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            yield Path(tmpdir)

    def test_round_trip(self, temp_dir):
        config = ScenarioConfig(name="roundtrip", experiment="reconstruct", n_lambda=11, r=0.5)
        path = ScenarioLoader().save(config, str(temp_dir / "scenario.json"))
        loaded = ScenarioLoader(str(path)).load()
        assert loaded == config
        assert loaded.config_hash() == config.config_hash()

    def test_missing_file(self, temp_dir):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioLoader(str(temp_dir / "absent.json")).load()
        assert excinfo.value.key == "config"

    def test_invalid_json(self, temp_dir):
        path = temp_dir / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ScenarioLoader(str(path)).load()

    def test_not_an_object(self, temp_dir):
        path = temp_dir / "list.json"
        path.write_text(json.dumps([1, 2, 3]))
        with pytest.raises(ConfigError):
            ScenarioLoader(str(path)).load()


class TestBuiltinScenarios:
    """Every builtin scenario is a valid configuration."""

    @pytest.mark.parametrize("name", list_scenarios())
    def test_validates(self, name):
        config = get_scenario(name)
        assert config.name == name

    def test_unknown(self):
        with pytest.raises(ConfigError):
            get_scenario("nonexistent")


if __name__ == "__main__":
    pytest.main([__file__])
