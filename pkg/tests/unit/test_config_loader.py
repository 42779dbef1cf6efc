"""
Unit tests for configuration loader.

Tests the ConfigLoader class that handles loading configuration
from multiple sources with proper precedence.
"""

import json
import os
import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest
import yaml
from pydantic import ValidationError

from geoformer.core.config import (
    ConfigLoader,
    get_config,
    reset_config,
    setup_config,
    write_resolved_config,
)
from geoformer.core.errors import ConfigFileNotFound, ConfigurationError
from geoformer.core.models.config import MetricGrouping, RunConfig


@pytest.fixture(autouse=True)
def clean_geof_env():
    """Strip GEOF_ variables that the developer's shell may carry."""
    kept = {k: v for k, v in os.environ.items() if not k.startswith("GEOF_")}
    with patch.dict(os.environ, kept, clear=True):
        yield


@pytest.mark.unit
class TestConfigLoader:
    """Test configuration loading functionality."""

    def test_load_default_config(self):
        """
        Test loading default configuration.

        Purpose: Verify that ConfigLoader builds a valid RunConfig from defaults
        alone.

        Checkpoints:
        - load() returns a RunConfig
        - Horizon is day 60 and the vocabulary size is 1021
        - Default sampling is temperature 1.0, top_k 5
        - Default log level is "INFO"

        Mocks: None

        Dependencies:
        - ConfigLoader from core.config

        Notes: The pipeline must run without any configuration file.
        """
        config = ConfigLoader().load()

        assert isinstance(config, RunConfig)
        assert config.data.horizon_day == 60
        assert config.model.vocab_size == 1021
        assert config.generation.temperature == 1.0
        assert config.generation.top_k == 5
        assert config.log_level == "INFO"

    def test_load_from_yaml_file(self):
        """
        Test loading configuration from YAML file.

        Purpose: Verify that values in a YAML file override defaults, including
        nested sections.

        Checkpoints:
        - Nested model and train values come from the file
        - Untouched sections keep their defaults

        Mocks: None - uses a real temporary file

        Dependencies:
        - tempfile, yaml
        """
        config_data = {
            "model": {"n_layers": 4, "d_model": 64, "n_heads": 4},
            "train": {"lr_max": 1e-3, "batch_size": 16},
            "log_level": "DEBUG",
        }

        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            yaml.dump(config_data, f)
            config_file = f.name

        try:
            config = ConfigLoader().load(config_file=config_file)

            assert config.model.n_layers == 4
            assert config.model.d_model == 64
            assert config.train.lr_max == 1e-3
            assert config.train.batch_size == 16
            assert config.log_level == "DEBUG"
            assert config.generation.top_k == 5
        finally:
            os.unlink(config_file)

    def test_load_from_json_file(self, tmp_path):
        """
        Test loading configuration from a JSON file.

        Purpose: Verify that .json files are parsed as JSON.

        Checkpoints:
        - Enum-valued fields are parsed from their string form
        - Nested GEO-BLEU parameters are applied

        Mocks: None

        Dependencies: pytest tmp_path
        """
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                {
                    "metrics": {
                        "geobleu_grouping": "per_trajectory",
                        "geobleu": {"max_n": 2, "beta": 0.25},
                    }
                }
            )
        )

        config = ConfigLoader().load(config_file=path)

        assert config.metrics.geobleu_grouping is MetricGrouping.PER_TRAJECTORY
        assert config.metrics.geobleu.max_n == 2
        assert config.metrics.geobleu.beta == 0.25

    def test_load_from_environment_variables(self):
        """
        Test loading configuration from environment variables.

        Purpose: Verify that GEOF_-prefixed variables map onto nested fields
        whose names themselves contain underscores.

        Checkpoints:
        - GEOF_TRAIN_LR_MAX maps to train.lr_max
        - GEOF_GENERATION_TOP_K maps to generation.top_k (int conversion)
        - GEOF_GENERATION_ROLL maps to generation.roll (bool conversion)
        - GEOF_LOG_LEVEL maps to the top-level field

        Mocks:
        - os.environ using patch.dict

        Dependencies:
        - unittest.mock.patch
        """
        env_vars = {
            "GEOF_TRAIN_LR_MAX": "0.002",
            "GEOF_GENERATION_TOP_K": "3",
            "GEOF_GENERATION_ROLL": "false",
            "GEOF_LOG_LEVEL": "WARNING",
        }

        with patch.dict(os.environ, env_vars):
            config = ConfigLoader().load()

            assert config.train.lr_max == 0.002
            assert config.generation.top_k == 3
            assert config.generation.roll is False
            assert config.log_level == "WARNING"

    def test_unknown_environment_variable_ignored(self):
        """Unknown GEOF_ variables are skipped with a warning, not an error."""
        with patch.dict(os.environ, {"GEOF_NOT_A_FIELD": "1"}):
            config = ConfigLoader().load()
        assert config == RunConfig()

    def test_precedence_env_over_file(self):
        """
        Test that environment variables take precedence over config files.

        Purpose: Verify the precedence hierarchy file < environment.

        Checkpoints:
        - Environment overrides file values for the same keys
        - File values for other keys remain

        Mocks:
        - os.environ using patch.dict

        Dependencies:
        - tempfile, yaml
        """
        config_data = {"train": {"lr_max": 1e-3, "epochs": 3}, "log_level": "DEBUG"}

        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            yaml.dump(config_data, f)
            config_file = f.name

        env_vars = {"GEOF_TRAIN_LR_MAX": "0.0001", "GEOF_LOG_LEVEL": "ERROR"}

        try:
            with patch.dict(os.environ, env_vars):
                config = ConfigLoader().load(config_file=config_file)

                assert config.train.lr_max == 0.0001
                assert config.log_level == "ERROR"
                assert config.train.epochs == 3
        finally:
            os.unlink(config_file)

    def test_overrides_have_highest_precedence(self, tmp_path):
        """
        Test that explicit overrides beat both file and environment.

        Purpose: CLI flags arrive as dotted overrides and must win; a None
        override means "flag not given" and must not clobber anything.

        Checkpoints:
        - "generation.temperature" override beats the environment
        - A None override leaves the file value in place

        Mocks:
        - os.environ using patch.dict
        """
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.dump({"generation": {"temperature": 0.6, "top_k": 7}}))

        with patch.dict(os.environ, {"GEOF_GENERATION_TEMPERATURE": "0.8"}):
            config = ConfigLoader().load(
                config_file=path,
                overrides={"generation.temperature": 0.2, "generation.top_k": None},
            )

        assert config.generation.temperature == 0.2
        assert config.generation.top_k == 7

    def test_dotenv_file_is_read(self, tmp_path):
        """Variables from a .env file are applied like process environment."""
        dotenv = tmp_path / ".env"
        dotenv.write_text("GEOF_DATA_HORIZON_DAY=50\n")

        with patch.dict(os.environ, {}):
            config = ConfigLoader(dotenv_path=dotenv).load()

        assert config.data.horizon_day == 50

    def test_invalid_config_file(self):
        """
        Test handling of invalid configuration file.

        Purpose: Malformed YAML is reported as a ConfigurationError.

        Checkpoints:
        - ConfigurationError is raised
        - Temporary file cleanup happens even on error

        Mocks: None
        """
        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            f.write("invalid: yaml: content: [")
            config_file = f.name

        try:
            with pytest.raises(ConfigurationError):
                ConfigLoader().load(config_file=config_file)
        finally:
            os.unlink(config_file)

    def test_non_mapping_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ConfigurationError):
            ConfigLoader().load(config_file=path)

    def test_nonexistent_config_file(self):
        """
        Test handling of nonexistent configuration file.

        Purpose: A config file that was asked for but is missing is an error,
        since silently using defaults would train a different model.

        Checkpoints:
        - ConfigFileNotFound (a ConfigurationError) is raised
        """
        with pytest.raises(ConfigFileNotFound):
            ConfigLoader().load(config_file="/nonexistent/config.yaml")

    def test_validation_error_handling(self):
        """
        Test handling of validation errors in configuration.

        Purpose: Out-of-range values are rejected by the Pydantic models.

        Checkpoints:
        - temperature <= 0 is rejected
        - top_p > 1 is rejected

        Mocks: None

        Dependencies:
        - tempfile, yaml, pytest
        """
        config_data = {"generation": {"temperature": 0.0, "top_p": 1.5}}

        with tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False) as f:
            yaml.dump(config_data, f)
            config_file = f.name

        try:
            with pytest.raises(ValidationError):
                ConfigLoader().load(config_file=config_file)
        finally:
            os.unlink(config_file)


@pytest.mark.unit
class TestResolvedConfig:
    """Test the global config helpers."""

    def test_setup_config_returns_overridden_config(self):
        config = setup_config(overrides={"jobs": 4})
        assert config.jobs == 4
        assert get_config() is config
        reset_config()

    def test_get_config_before_setup(self):
        reset_config()
        with pytest.raises(RuntimeError):
            get_config()

    def test_write_resolved_config_roundtrips(self, tmp_path):
        """
        Test that the written resolved config reloads to the same RunConfig.

        Purpose: resolved_config.json is the record of what a run used, so
        loading it back must reproduce the configuration exactly.

        Checkpoints:
        - File is written into the (created) output directory
        - Keys are sorted and the file ends with a newline
        - Reloading through ConfigLoader gives an equal RunConfig
        """
        config = ConfigLoader().load(overrides={"train.lr_max": 3e-4, "model.n_layers": 3})

        path = write_resolved_config(config, tmp_path / "run")

        text = path.read_text()
        assert path.name == "resolved_config.json"
        assert text.endswith("\n")
        assert list(json.loads(text)) == sorted(json.loads(text))
        assert ConfigLoader().load(config_file=path) == config

    def test_example_config_matches_defaults(self):
        example = Path(__file__).resolve().parents[2] / "docs" / "config.example.json"
        assert ConfigLoader().load(config_file=example) == RunConfig()
