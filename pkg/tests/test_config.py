"""Tests for run configuration, hashing and CLI merging."""

import argparse
import json

import pytest

from zgkn.config import (
    ENV_WORKERS,
    RunConfig,
    config_from_args,
    default_workers,
    params_from_args,
    parse_float_list,
)
from zgkn.errors import ConfigError
from zgkn.geometry import ModelParams


def _args(**kwargs) -> argparse.Namespace:
    defaults = {
        "config": None,
        "a": None,
        "gamma": None,
        "mass": None,
        "charge": None,
        "point_charge": None,
        "current": None,
        "alpha": None,
    }
    return argparse.Namespace(**{**defaults, **kwargs})


class TestRunConfig:
    """Tests for validation and hashing of RunConfig."""

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="Unknown config sections"):
            RunConfig(params=ModelParams(a=0.05), sections={"plot": {}})

    @pytest.mark.parametrize("tolerances", [{"tol_x": 1e-9}, {"tol_E": -1.0}, {"tol_E": "small"}])
    def test_bad_tolerances_rejected(self, tolerances):
        with pytest.raises(ConfigError):
            RunConfig(params=ModelParams(a=0.05), tolerances=tolerances)

    def test_seed_must_be_integer(self):
        with pytest.raises(ConfigError, match="seed"):
            RunConfig(params=ModelParams(a=0.05), seed=1.5)

    def test_config_hash_is_stable(self):
        first = RunConfig(params=ModelParams(a=0.05), sections={"angular": {"kappa": 0.5}})
        second = RunConfig(params=ModelParams(a=0.05), sections={"angular": {"kappa": 0.5}})
        assert len(first.config_hash()) == 64
        assert first.config_hash() == second.config_hash()

    def test_sections_change_config_hash_not_model_hash(self):
        base = RunConfig(params=ModelParams(a=0.05))
        other = base.with_section("angular", {"kappa": 1.5})
        assert base.config_hash() != other.config_hash()
        assert base.model_hash() == other.model_hash()

    def test_tolerances_change_model_hash(self):
        base = RunConfig(params=ModelParams(a=0.05))
        tight = RunConfig(params=ModelParams(a=0.05), tolerances={"tol_E": 1e-14})
        assert base.model_hash() != tight.model_hash()

    def test_with_section_drops_none(self):
        config = RunConfig(params=ModelParams(a=0.05), sections={"state": {"kappa": 0.5}})
        merged = config.with_section("state", {"kappa": None, "branch": 2})
        assert merged.section("state") == {"kappa": 0.5, "branch": 2}

    def test_section_lookup_validated(self):
        with pytest.raises(ConfigError, match="Unknown config section"):
            RunConfig(params=ModelParams(a=0.05)).section("plot")

    def test_tolerance_default(self):
        config = RunConfig(params=ModelParams(a=0.05), tolerances={"tol_E": 1e-10})
        assert config.tolerance("tol_E", 1.0) == 1e-10
        assert config.tolerance("tol_match", 0.5) == 0.5

    def test_admissibility_warning_not_hashed(self):
        wide = RunConfig(params=ModelParams(a=0.8))
        assert any("1/2" in w for w in wide.warnings)
        assert "warnings" not in wide.to_dict()


class TestSerialization:
    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="Unknown config keys"):
            RunConfig.from_dict({"params": {"a": 0.05}, "plots": {}})

    def test_from_dict_requires_params(self):
        with pytest.raises(ConfigError, match="lacks 'params'"):
            RunConfig.from_dict({"sections": {}})

    def test_from_dict_requires_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            RunConfig.from_dict([1, 2])

    def test_save_load(self, tmp_path):
        config = RunConfig(
            params=ModelParams.hydrogenic(a=0.05, gamma=-0.25),
            sections={"spectrum": {"window": "-0.9,0.9"}},
            seed=7,
            tolerances={"tol_E": 1e-11},
        )
        path = tmp_path / "run.json"
        config.save(path)
        loaded = RunConfig.load(path)
        assert loaded == config
        assert loaded.config_hash() == config.config_hash()
        assert json.loads(path.read_text())["seed"] == 7

    def test_load_unreadable(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="Cannot read config"):
            RunConfig.load(path)


class TestWorkers:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv(ENV_WORKERS, "3")
        assert default_workers() == 3

    def test_default_is_bounded(self, monkeypatch):
        monkeypatch.delenv(ENV_WORKERS, raising=False)
        assert 1 <= default_workers() <= 4

    @pytest.mark.parametrize("value,match", [("many", "integer"), ("0", "at least 1")])
    def test_bad_values(self, monkeypatch, value, match):
        monkeypatch.setenv(ENV_WORKERS, value)
        with pytest.raises(ConfigError, match=match):
            default_workers()


class TestArgumentMerging:
    """Tests for overlaying command-line flags on a configuration."""

    def test_radius_required(self):
        with pytest.raises(ConfigError, match="ring radius is required"):
            params_from_args(_args(), None)

    def test_gamma_builds_hydrogenic_charges(self):
        params = params_from_args(_args(a=0.05, gamma=-0.25), None)
        expected = ModelParams.hydrogenic(a=0.05, gamma=-0.25)
        assert params.charge == pytest.approx(expected.charge)
        assert params.point_charge == pytest.approx(expected.point_charge)

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.json"
        RunConfig(
            params=ModelParams(a=0.05, charge=0.1), sections={"angular": {"kappa": 0.5}}
        ).save(path)
        config = config_from_args(
            _args(config=str(path), a=0.02, kappa=None, branch=3), "angular", ("kappa", "branch")
        )
        assert config.params.a == 0.02
        assert config.params.charge == 0.1
        assert config.section("angular") == {"kappa": 0.5, "branch": 3}


class TestParseFloatList:
    def test_parses_text(self):
        assert parse_float_list("-0.5, 0.5,") == [-0.5, 0.5]

    def test_passes_sequences(self):
        assert parse_float_list((1, 2)) == [1.0, 2.0]

    def test_rejects_garbage(self):
        with pytest.raises(ConfigError, match="comma-separated"):
            parse_float_list("1,two")
