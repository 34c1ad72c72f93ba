"""Run configuration and its ``key = value`` text format."""

from __future__ import annotations

from typing import Callable, Dict, List, Tuple

from dagster import Config

from stokes_control.errors import ConfigError
from stokes_control.quadrature import MAX_DEGREE, MIN_DEGREE

SCHEME_NAMES = ["Classical", "PartialRobust", "FullRobust", "ScottVogelius"]


class RunConfig(Config):
    """Parameter sweep shared by the pipeline assets and the CLI."""

    examples: List[int] = [1, 2]
    schemes: List[str] = list(SCHEME_NAMES)
    levels: List[int] = [10, 20, 40]
    nu: List[float] = [1.0, 1e-3]
    alpha: List[float] = [1e-1, 1e-3, 1e-4, 1e-6]
    eps: List[float] = [0.0, 1e-4]
    assembly_degree: int = 8
    data_degree: int = 12
    tolerance: float = 1e-10
    reference_level: int = 160
    cache_dir: str = "data/references"
    output_dir: str = "data/results"
    generate_references: bool = True
    threads: int = 1


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (scalar parser, is list)
FIELDS: Dict[str, Tuple[Callable[[str], object], bool]] = {
    "examples": (int, True),
    "schemes": (str, True),
    "levels": (int, True),
    "nu": (float, True),
    "alpha": (float, True),
    "eps": (float, True),
    "assembly_degree": (int, False),
    "data_degree": (int, False),
    "tolerance": (float, False),
    "reference_level": (int, False),
    "cache_dir": (str, False),
    "output_dir": (str, False),
    "generate_references": (_parse_bool, False),
    "threads": (int, False),
}


def config_to_dict(config: RunConfig) -> Dict[str, object]:
    out = {}
    for key, (_, is_list) in FIELDS.items():
        value = getattr(config, key)
        out[key] = list(value) if is_list else value
    return out


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    lines = []
    for key, value in config_to_dict(config).items():
        if isinstance(value, list):
            lines.append(f"{key} = {', '.join(_format_scalar(v) for v in value)}")
        else:
            lines.append(f"{key} = {_format_scalar(value)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    values: Dict[str, object] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        parser, is_list = FIELDS[key]
        try:
            if is_list:
                items = [item.strip() for item in value.split(",")]
                if not all(items):
                    raise ValueError("empty list item")
                values[key] = [parser(item) for item in items]
            else:
                if not value:
                    raise ValueError("missing value")
                values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {number}: bad value for {key!r}: {exc}") from exc
    try:
        config = RunConfig(**values)
    except Exception as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    validate_run_config(config)
    return config


def validate_run_config(config: RunConfig) -> RunConfig:
    for key, (_, is_list) in FIELDS.items():
        if is_list and not getattr(config, key):
            raise ConfigError(f"{key} must not be empty")
    bad = sorted(set(config.examples) - {1, 2})
    if bad:
        raise ConfigError(f"unknown examples {bad}; expected 1 and/or 2")
    bad = [s for s in config.schemes if s not in SCHEME_NAMES]
    if bad:
        raise ConfigError(f"unknown schemes {bad}; expected a subset of {SCHEME_NAMES}")
    if any(n < 1 for n in config.levels) or config.reference_level < 1:
        raise ConfigError("mesh levels must be positive integers")
    if config.reference_level <= max(config.levels):
        raise ConfigError(
            f"reference_level {config.reference_level} must exceed the finest level {max(config.levels)}"
        )
    if 2 in config.examples:
        misaligned = [n for n in list(config.levels) + [config.reference_level] if n % 5]
        if misaligned:
            raise ConfigError(f"example 2 needs levels divisible by 5, got {misaligned}")
    if any(v <= 0 for v in config.nu):
        raise ConfigError(f"nu values must be positive, got {list(config.nu)}")
    if any(v <= 0 for v in config.alpha):
        raise ConfigError(f"alpha values must be positive, got {list(config.alpha)}")
    for key in ("assembly_degree", "data_degree"):
        degree = getattr(config, key)
        if not MIN_DEGREE <= degree <= MAX_DEGREE:
            raise ConfigError(f"{key}={degree} outside the supported range {MIN_DEGREE}..{MAX_DEGREE}")
    if config.tolerance <= 0:
        raise ConfigError(f"tolerance must be positive, got {config.tolerance}")
    if config.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {config.threads}")
    return config


def describe_defaults() -> str:
    """Default configuration, as shown in ``--help``."""
    return serialize_config(RunConfig())
