"""Load experiment configs from JSON files and apply command line overrides."""
from __future__ import annotations

import pathlib
from typing import Any

from pydantic import ValidationError

from filterlab.exceptions import ConfigurationError
from filterlab.models.experiment_models import ExperimentConfig


def load_experiment_config(path: str | pathlib.Path) -> ExperimentConfig:
    """Read and validate an ExperimentConfig; every failure names the file."""
    config_path = pathlib.Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"Config file not found: {config_path}")
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {config_path}: {exc}") from exc
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid config file {config_path}: {exc}") from exc


def with_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Revalidated copy of ``config`` with the non-None overrides applied."""
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return config
    return ExperimentConfig.model_validate({**config.model_dump(), **updates})
