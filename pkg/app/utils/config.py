"""
Configuration Module

This module handles loading and accessing configuration settings from YAML files
and environment variables.
"""
import os
import yaml
from typing import Dict, Any, Optional
from pathlib import Path

from dotenv import load_dotenv

from app.utils.logger import get_logger

logger = get_logger(__name__)

# Global configuration dictionary
_config = {}

# Environment prefixes mapped onto settings.yaml sections
_ENV_SECTIONS = {
    "APP_": "app",
    "INTEGRATOR_": "integrator",
    "THRESHOLDS_": "thresholds",
    "SWEEP_": "sweep",
    "ISOTHERMAL_": "isothermal",
    "OUTPUT_": "output",
}


def _parse_env_value(value: str) -> Any:
    """
    Parse an environment string: integers, then floats ("5e-4", which YAML 1.1
    would keep as a string), then any other YAML scalar or flow value.
    """
    for number in (int, float):
        try:
            return number(value)
        except ValueError:
            pass
    try:
        return yaml.safe_load(value)
    except yaml.YAMLError:
        return value


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML file and environment variables.

    Args:
        config_path: Path to the configuration file. If None, uses default path.

    Returns:
        Dictionary containing configuration settings
    """
    global _config

    # Default config path
    if config_path is None:
        # Get the project root directory (parent of app directory)
        project_root = Path(__file__).parent.parent.parent
        config_path = project_root / "config" / "settings.yaml"

    # Load configuration from YAML file
    try:
        with open(config_path, 'r') as file:
            _config = yaml.safe_load(file) or {}
        logger.info(f"Configuration loaded from {config_path}")
    except Exception as e:
        logger.error(f"Error loading configuration from {config_path}: {str(e)}")
        _config = {}

    # A local .env file may carry the same overrides as the shell environment
    load_dotenv(override=False)

    # Override with environment variables if they exist
    # For example, INTEGRATOR_DT0=5e-4 overrides integrator.dt0
    for key, value in os.environ.items():
        for prefix, section in _ENV_SECTIONS.items():
            if not key.startswith(prefix):
                continue
            setting = key[len(prefix):].lower()
            if not setting:
                continue
            if not isinstance(_config.get(section), dict):
                _config[section] = {}
            _config[section][setting] = _parse_env_value(value)
            logger.debug(f"Overriding {section}.{setting} with environment variable {key}")
            break

    return _config


def get_config() -> Dict[str, Any]:
    """
    Get the current configuration.

    Returns:
        Dictionary containing configuration settings
    """
    global _config
    if not _config:
        load_config()
    return _config


def get_setting(section: str, default: Any = None) -> Any:
    """
    Get a specific section from the configuration.

    Args:
        section: The section of the configuration (e.g., 'integrator', 'thresholds')
        default: Default value to return if the section is not found

    Returns:
        The section dictionary or the default value
    """
    config = get_config()
    try:
        return config.get(section, default)
    except Exception as e:
        logger.error(f"Error getting section {section}: {str(e)}")
        return default


def section_value(section: str, key: str, default: Any) -> Any:
    """
    Read one key of a section, falling back to ``default``.

    Args:
        section: Section name in settings.yaml
        key: Key inside the section
        default: Value used when the section or key is absent

    Returns:
        The configured value or the default
    """
    values = get_setting(section, {}) or {}
    return values.get(key, default)
