from pathlib import Path
from typing import Dict, Iterable, Optional
import copy

import yaml
from pydantic import ValidationError
from pydantic_settings import BaseSettings

from app.errors import ConfigError, ToolkitError
from app.schemas.experiment import ExperimentConfig


class Settings(BaseSettings):
    # Application Settings
    LOG_LEVEL: str = "INFO"
    PROGRESS: bool = False

    # Experiment defaults
    CONFIG_PATH: str = "config/default.yaml"
    OUTPUT_DIR: str = "runs/default"

    # Single-threaded torch keeps reductions deterministic
    TORCH_THREADS: int = 1

    model_config = {
        "extra": "allow",
        "env_file": ".env"
    }

settings = Settings()


def parse_override(item: str) -> tuple:
    """Split ``section.leaf=value``; the value is parsed as a YAML scalar or list."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.leaf=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"{key}: cannot parse value {raw!r}: {e}")
    return key, value


def apply_overrides(raw: Dict, overrides: Iterable[str]) -> Dict:
    merged = copy.deepcopy(raw)
    for item in overrides:
        key, value = parse_override(item)
        node = merged
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"{key}: {part} is a leaf, not a section")
            node = child
        node[parts[-1]] = value
    return merged


def _field_path(error: dict) -> str:
    return ".".join(str(p) for p in error.get("loc", ())) or "<root>"


def load_experiment_config(
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    output_dir: Optional[str] = None,
) -> ExperimentConfig:
    """Resolve the experiment config: flag > file > default."""
    raw: Dict = {}
    if path:
        config_file = Path(path)
        if not config_file.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            raw = yaml.safe_load(config_file.read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")

    raw.setdefault("output_dir", settings.OUTPUT_DIR)
    raw = apply_overrides(raw, overrides)
    if output_dir is not None:
        raw["output_dir"] = output_dir

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"{_field_path(first)}: {first['msg']}")
    except ToolkitError as e:
        raise ConfigError(f"dataset.synth: {e}")
