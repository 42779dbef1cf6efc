"""
Configuration management for GeoFormer.

Handles loading configuration from multiple sources with proper precedence:
1. Default values (lowest precedence)
2. Configuration files (JSON or YAML)
3. Environment variables, including those from a .env file
4. Explicit overrides such as CLI flags (highest precedence)
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from geoformer.core.errors import ConfigFileNotFound, ConfigurationError
from geoformer.core.models.config import RunConfig

logger = logging.getLogger(__name__)

# Global configuration instance
_config: Optional[RunConfig] = None


class ConfigLoader:
    """Loads configuration from multiple sources with proper precedence."""

    ENV_PREFIX = "GEOF_"

    def __init__(self, dotenv_path: Optional[Union[str, Path]] = None):
        """
        Initialize the configuration loader.

        Args:
            dotenv_path: Optional .env file whose variables are loaded (without
                overriding variables already set in the process environment)
        """
        self.dotenv_path = dotenv_path

    def load(
        self,
        config_file: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> RunConfig:
        """
        Load configuration from multiple sources.

        Args:
            config_file: Optional path to a JSON or YAML configuration file
            overrides: Optional dotted-key overrides, e.g. {"train.lr_max": 1e-4}

        Returns:
            Validated RunConfig instance

        Raises:
            ConfigFileNotFound: If config_file is given but does not exist
            ConfigurationError: If the file cannot be parsed
            ValidationError: If configuration validation fails
        """
        config_dict: Dict[str, Any] = {}

        if config_file is not None:
            if not Path(config_file).exists():
                raise ConfigFileNotFound(f"Config file not found: {config_file}")
            file_config = self._load_from_file(config_file)
            config_dict = self._merge_dicts(config_dict, file_config)
            logger.info(f"Loaded configuration from file: {config_file}")

        if self.dotenv_path is not None:
            load_dotenv(self.dotenv_path, override=False)

        env_config = self._load_from_env()
        if env_config:
            config_dict = self._merge_dicts(config_dict, env_config)
            logger.info("Loaded configuration from environment variables")

        if overrides:
            override_config: Dict[str, Any] = {}
            for dotted_key, value in overrides.items():
                if value is None:
                    continue
                self._set_path(override_config, dotted_key.split("."), value)
            config_dict = self._merge_dicts(config_dict, override_config)

        try:
            config = RunConfig.model_validate(config_dict)
        except ValidationError as e:
            logger.error(f"Configuration validation failed: {e}")
            raise

        logger.debug("Configuration loaded and validated successfully")
        return config

    def _load_from_file(self, config_file: Union[str, Path]) -> Dict[str, Any]:
        """Load configuration from a JSON or YAML file."""
        path = Path(config_file)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"Failed to read config file: {e}")

        try:
            if path.suffix.lower() == ".json":
                data = json.loads(text)
            else:
                data = yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Invalid config file {path}: {e}")

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must contain a mapping")
        return data

    def _load_from_env(self) -> Dict[str, Any]:
        """Load configuration from GEOF_-prefixed environment variables."""
        config: Dict[str, Any] = {}

        env_vars = {k: v for k, v in os.environ.items() if k.startswith(self.ENV_PREFIX)}

        for env_key, env_value in env_vars.items():
            key_path = env_key[len(self.ENV_PREFIX):].lower()
            keys = self._resolve_env_key(key_path)
            if keys is None:
                logger.warning(f"Ignoring unknown configuration variable {env_key}")
                continue
            self._set_path(config, keys, self._convert_env_value(env_value))

        return config

    def _resolve_env_key(self, key_path: str) -> Optional[list]:
        """
        Map an underscore-joined key onto the RunConfig structure.

        Section names are matched first, so GEOF_TRAIN_LR_MAX resolves to
        ["train", "lr_max"] even though the field itself contains underscores.
        """
        fields = RunConfig.model_fields
        if key_path in fields:
            return [key_path]

        for section, info in fields.items():
            prefix = section + "_"
            if not key_path.startswith(prefix):
                continue
            annotation = info.annotation
            if isinstance(annotation, type) and issubclass(annotation, BaseModel):
                field_name = key_path[len(prefix):]
                if field_name in annotation.model_fields:
                    return [section, field_name]
        return None

    def _set_path(self, config: Dict[str, Any], keys: list, value: Any) -> None:
        """Set a nested value, creating intermediate dictionaries."""
        current = config
        for key in keys[:-1]:
            if key not in current or not isinstance(current[key], dict):
                current[key] = {}
            current = current[key]
        current[keys[-1]] = value

    def _convert_env_value(self, value: str) -> Any:
        """Convert environment variable string to appropriate type."""
        if value.lower() in ('true', 'false'):
            return value.lower() == 'true'

        try:
            return int(value)
        except ValueError:
            pass

        try:
            return float(value)
        except ValueError:
            pass

        if value.startswith("[") or value.startswith("{"):
            try:
                return json.loads(value)
            except json.JSONDecodeError:
                pass

        return value

    def _merge_dicts(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge two dictionaries."""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_dicts(result[key], value)
            else:
                result[key] = value

        return result


def write_resolved_config(config: RunConfig, output_dir: Union[str, Path]) -> Path:
    """
    Write the fully resolved configuration next to a run's outputs.

    Args:
        config: The configuration the run used
        output_dir: Directory receiving resolved_config.json

    Returns:
        Path of the written file
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "resolved_config.json"
    path.write_text(
        json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def get_config() -> RunConfig:
    """
    Get the global configuration instance.

    Returns:
        The global RunConfig instance

    Raises:
        RuntimeError: If configuration has not been initialized
    """
    global _config
    if _config is None:
        raise RuntimeError(
            "Configuration not initialized. Call setup_config() first."
        )
    return _config


def setup_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Initialize the global configuration.

    Args:
        config_file: Optional path to configuration file
        overrides: Optional dotted-key overrides

    Returns:
        The initialized RunConfig instance
    """
    global _config
    loader = ConfigLoader(dotenv_path=".env" if Path(".env").exists() else None)
    _config = loader.load(config_file=config_file, overrides=overrides)
    return _config


def reset_config():
    """Reset the global configuration (mainly for testing)."""
    global _config
    _config = None
