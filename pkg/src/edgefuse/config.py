"""
Configuration management for edgefuse.

Two layers:
- Process settings (log level, log file, worker count) come from
  environment variables and an optional .env file.
- Run configs are flat `section.field = value` files that override the
  defaults of the pipeline's config dataclasses.
"""

from __future__ import annotations

import io
import os
import types
import typing
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from dotenv.parser import parse_stream

from edgefuse.evaluator import EvalConfig
from edgefuse.ground_truth import GroundTruthConfig
from edgefuse.net.model import ArchitectureConfig
from edgefuse.net.training import TrainConfig
from edgefuse.refiner import RefineConfig
from edgefuse.scenes import CorruptionSpec, SceneConfig
from edgefuse.segmenter import SegmentConfig
from edgefuse.utils.errors import ParseError

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Config:
    """
    Process-wide settings.

    Attributes:
        log_level: Logging level (default: INFO)
        log_file: Optional log file path
        jobs: Worker processes for per-scene work (default: 1)
    """

    log_level: str = "INFO"
    log_file: str | None = None
    jobs: int = 1


def _parse_int(value: str | None, default: int) -> int:
    """Parse an integer from environment variable string."""
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def load_config(env_file: str | Path | None = None) -> Config:
    """
    Load process settings from environment variables and a .env file.

    Args:
        env_file: Optional path to .env file. If not provided,
                  looks for .env in current directory and parent directories.

    Returns:
        Config: Validated configuration object

    Raises:
        ValueError: If a setting is invalid
    """
    if env_file:
        load_dotenv(env_file)
    else:
        load_dotenv()

    errors: list[str] = []

    log_level = os.getenv("EDGEFUSE_LOG_LEVEL", "INFO").upper()
    if log_level not in VALID_LOG_LEVELS:
        errors.append(f"EDGEFUSE_LOG_LEVEL must be one of {', '.join(VALID_LOG_LEVELS)}")

    log_file = os.getenv("EDGEFUSE_LOG_FILE") or None

    jobs = _parse_int(os.getenv("EDGEFUSE_JOBS"), 1)
    if jobs < 1:
        errors.append("EDGEFUSE_JOBS must be >= 1")

    if errors:
        error_msg = "Configuration errors:\n" + "\n".join(f"  - {e}" for e in errors)
        raise ValueError(error_msg)

    return Config(log_level=log_level, log_file=log_file, jobs=jobs)


# --- Run configs ---


@dataclass(frozen=True)
class RunConfig:
    """Every pipeline knob; sections map to the `section.` key prefix."""

    arch: ArchitectureConfig = ArchitectureConfig()
    train: TrainConfig = TrainConfig()
    corrupt: CorruptionSpec = CorruptionSpec()
    gt: GroundTruthConfig = GroundTruthConfig()
    segment: SegmentConfig = SegmentConfig()
    refine: RefineConfig = RefineConfig()
    eval: EvalConfig = EvalConfig()
    scene: SceneConfig = SceneConfig()


SECTIONS = tuple(f.name for f in fields(RunConfig))


def _convert_scalar(kind: Any, text: str) -> Any:
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    if isinstance(kind, type) and issubclass(kind, Enum):
        try:
            return kind(text)
        except ValueError:
            choices = ", ".join(str(m.value) for m in kind)
            raise ValueError(f"expected one of {choices}, got {text!r}")
    raise ValueError(f"unsupported field type {kind!r}")


def convert_value(kind: Any, text: str) -> Any:
    """
    Convert config text to a dataclass field type.

    Handles int, float, bool, str, Enum, `X | None` (via `none`) and tuples
    written as comma lists.
    """
    text = text.strip()
    origin = typing.get_origin(kind)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(kind) if a is not type(None)]
        if text.lower() == "none":
            return None
        return convert_value(args[0], text)
    if origin is tuple:
        args = typing.get_args(kind)
        items = [item.strip() for item in text.split(",") if item.strip()]
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert_scalar(args[0], item) for item in items)
        if len(items) != len(args):
            raise ValueError(f"expected {len(args)} comma-separated values, got {len(items)}")
        return tuple(_convert_scalar(a, item) for a, item in zip(args, items, strict=True))
    return _convert_scalar(kind, text)


def parse_run_config(text: str, path: str | Path = "<config>") -> RunConfig:
    """
    Parse run-config text.

    Raises:
        ParseError: Naming the line of an unknown key, bad value or invalid combination
    """
    overrides: dict[str, dict[str, tuple[str, int]]] = {name: {} for name in SECTIONS}
    for binding in parse_stream(io.StringIO(text)):
        line = binding.original.line
        if binding.error:
            raise ParseError(f"cannot parse {binding.original.string.strip()!r}", path, line)
        if binding.key is None:
            continue
        section, _, name = binding.key.partition(".")
        if section not in overrides or not name:
            raise ParseError(f"{binding.key}: unknown key", path, line)
        if binding.value is None:
            raise ParseError(f"{binding.key}: missing value", path, line)
        overrides[section][name] = (binding.value, line)

    defaults = RunConfig()
    sections: dict[str, Any] = {}
    for section, values in overrides.items():
        base = getattr(defaults, section)
        hints = typing.get_type_hints(type(base))
        known = {f.name for f in fields(base)}
        converted: dict[str, Any] = {}
        for name, (raw, line) in values.items():
            key = f"{section}.{name}"
            if name not in known:
                raise ParseError(f"{key}: unknown key", path, line)
            try:
                converted[name] = convert_value(hints[name], raw)
            except ValueError as e:
                raise ParseError(f"{key}: {e}", path, line) from e
        if not converted:
            continue
        try:
            sections[section] = replace(base, **converted)
        except ValueError as e:
            last_line = max(line for _, line in values.values())
            raise ParseError(f"{section}: {e}", path, last_line) from e
    return replace(defaults, **sections)


def load_run_config(path: str | Path | None) -> RunConfig:
    """
    Load a run config file; None gives all defaults.

    Raises:
        ParseError: If the file is unreadable or malformed
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read config: {e.strerror or e}", path) from e
    return parse_run_config(text, path)


def format_run_config(config: RunConfig) -> str:
    """Render every key with its current value, one section per block."""
    blocks = []
    for section in SECTIONS:
        obj = getattr(config, section)
        lines = [f"# {section}"]
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)
