"""Tests for config loading, profiles and the worker pool."""

from __future__ import annotations

from fractions import Fraction

import pytest

from ergotile.config import (
    PROFILES,
    THREADS_ENV,
    ExperimentConfig,
    load_config,
    parallel_map,
    parse_config,
    worker_count,
)
from ergotile.exceptions import ConfigError, ValidationError


class TestParseConfig:
    def test_minimal_config_uses_test_profile(self) -> None:
        """Only ``kind`` is required; defaults come from the test profile."""
        config = parse_config({"kind": "lemma7"})
        assert config.profile == "test"
        assert config.tiles.e == PROFILES["test"]["tiles"]["e"]
        assert config.seed == 1

    def test_paper_profile_constants(self) -> None:
        """The full-constant profile carries e=100 and delta=1000."""
        config = parse_config({"kind": "lemma7", "profile": "paper"})
        assert (config.tiles.e, config.tiles.delta, config.tiles.c_sep) == (100, 1000, 10.0)
        assert config.theta().low == 1000.0

    def test_explicit_values_override_profile(self) -> None:
        """Values in the document win over the profile."""
        config = parse_config({"kind": "lemma7", "profile": "paper", "tiles": {"c_sep": 12}})
        assert config.tiles.c_sep == 12.0
        assert config.tiles.e == 100

    def test_unknown_kind_rejected_by_schema(self) -> None:
        """Kinds outside the schema enum fail validation."""
        with pytest.raises(ValidationError):
            parse_config({"kind": "carleson"})

    def test_missing_kind_rejected(self) -> None:
        """A config without a kind is invalid."""
        with pytest.raises(ConfigError):
            parse_config({"seed": 3})

    def test_theta_order_checked(self) -> None:
        """theta_high must exceed theta_low."""
        with pytest.raises(ConfigError, match="theta_high"):
            parse_config({"kind": "packets", "tiles": {"theta_low": 8, "theta_high": 4}})

    def test_scales_must_increase(self) -> None:
        """U must be strictly increasing."""
        with pytest.raises(ConfigError):
            parse_config({"kind": "single-tree", "scales": {"U": [0, 3, 3]}})

    def test_tile_constants_checked(self) -> None:
        """A gap too small for the separation constant is rejected."""
        with pytest.raises(ConfigError, match="tile constants"):
            parse_config({"kind": "lemma7", "tiles": {"e": 2}})

    def test_tile_system_uses_fractions(self) -> None:
        """Tile constants are carried as exact fractions."""
        system = parse_config({"kind": "lemma7"}).tile_system()
        assert system.c_sep == Fraction(2)


class TestParams:
    def test_param_default(self) -> None:
        """Missing params fall back to the default."""
        assert ExperimentConfig(kind="grids").param("window", 64) == 64

    def test_param_int_widened_to_float(self) -> None:
        """An integer is accepted where a float is expected."""
        config = ExperimentConfig(kind="ergodic", params={"alpha": 1})
        value = config.param("alpha", 0.5)
        assert value == 1.0 and isinstance(value, float)

    def test_param_type_mismatch(self) -> None:
        """A wrongly typed param raises ConfigError."""
        config = ExperimentConfig(kind="grids", params={"window": "wide"})
        with pytest.raises(ConfigError, match="params.window"):
            config.param("window", 64)


class TestLoadConfig:
    def test_load_yaml(self, write_config) -> None:
        """A YAML file parses into a config."""
        path = write_config("kind: transfer-bridge\nseed: 4\nparams:\n  cases: 2\n")
        config = load_config(path)
        assert config.kind == "transfer-bridge"
        assert config.param("cases", 20) == 2

    def test_missing_file(self, tmp_dir) -> None:
        """A missing file is a config error."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_dir / "absent.yaml")

    def test_malformed_yaml(self, write_config) -> None:
        """Broken YAML is a config error."""
        with pytest.raises(ConfigError, match="malformed"):
            load_config(write_config("kind: [lemma7\n"))

    def test_non_mapping(self, write_config) -> None:
        """A top-level list is rejected."""
        with pytest.raises(ConfigError, match="mapping"):
            load_config(write_config("- lemma7\n"))


class TestWorkerPool:
    def test_default_single_worker(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Without the environment variable one worker is used."""
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert worker_count() == 1

    @pytest.mark.parametrize("value", ["0", "-2", "many"])
    def test_bad_thread_count(self, monkeypatch: pytest.MonkeyPatch, value: str) -> None:
        """Non-positive or non-integer thread counts are rejected."""
        monkeypatch.setenv(THREADS_ENV, value)
        with pytest.raises(ConfigError):
            worker_count()

    def test_parallel_map_preserves_order(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Results come back in input order on several threads."""
        monkeypatch.setenv(THREADS_ENV, "4")
        assert parallel_map(lambda v: v * v, range(20)) == [v * v for v in range(20)]
