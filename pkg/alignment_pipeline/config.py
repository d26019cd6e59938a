"""Experiment configuration from ``key = value`` files, ``.env`` defaults and CLI overrides."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, find_dotenv, load_dotenv
from pydantic import ValidationError

from .errors import UsageError
from .export import atomic_write_text
from .models import ExperimentConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ENV_SEED = "ALIGN_SEED"
ENV_OUTPUT_DIR = "ALIGN_OUTPUT_DIR"


def _nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """``{"model.d_emb": "64"}`` -> ``{"model": {"d_emb": "64"}}``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.strip().split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise UsageError(f"config key {key!r} conflicts with scalar key {part!r}")
            node = child
        node[parts[-1]] = value
    return nested


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def read_config_file(path: PathLike) -> Dict[str, Optional[str]]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return dict(dotenv_values(path, encoding="utf-8"))


def env_defaults() -> Dict[str, Any]:
    """Seed from ``ALIGN_SEED`` (environment or ``.env`` in the working directory)."""
    load_dotenv(find_dotenv(usecwd=True), override=False)
    defaults: Dict[str, Any] = {}
    if os.getenv(ENV_SEED):
        defaults["seed"] = os.environ[ENV_SEED]
    return defaults


def default_output_base() -> str:
    load_dotenv(find_dotenv(usecwd=True), override=False)
    return os.getenv(ENV_OUTPUT_DIR, "runs")


def load_config(path: Optional[PathLike] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Resolve environment defaults, then the config file, then ``overrides`` (dotted keys).

    Unknown keys raise ``UsageError``.
    """
    values: Dict[str, Any] = _nest(env_defaults())
    if path is not None:
        flat = read_config_file(path)
        missing = [key for key, value in flat.items() if value is None]
        if missing:
            raise UsageError(f"config keys without a value in {path}: {', '.join(missing)}")
        _merge(values, _nest(flat))
    if overrides:
        _merge(values, _nest({k: v for k, v in overrides.items() if v is not None}))
    try:
        config = ExperimentConfig(**values)
    except ValidationError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    logger.debug("Resolved config: %s", config.model_dump())
    return config


def save_config(config: ExperimentConfig, output_dir: PathLike) -> str:
    path = Path(output_dir) / "config.json"
    atomic_write_text(path, json.dumps(config.model_dump(), indent=2, sort_keys=True))
    return str(path)
