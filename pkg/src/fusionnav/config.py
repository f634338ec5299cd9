"""Runtime defaults plus the plain key=value override file.

The config file uses dotted keys for nested sections, one per line::

    omega_max=1.2
    robot_radius=0.18
    expert.kp=2.0
    camera.image_w=80
    train.batch_size=32

A path given on the command line wins over the FUSIONNAV_CONFIG environment
variable; unset keys keep their built-in defaults.
"""

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from fusionnav.training import TrainConfig
from fusionnav.world import CameraModel

ENV_VAR = "FUSIONNAV_CONFIG"


@dataclass(frozen=True)
class ExpertConfig:
    k_sectors: int = 9
    kp: float = 2.0


@dataclass(frozen=True)
class RuntimeConfig:
    omega_max: float = 1.0
    robot_radius: float = 0.18
    linear_velocity: float = 0.1
    cadence: float = 0.2
    camera: CameraModel = field(default_factory=CameraModel)
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


class ConfigFileError(ValueError):
    """Unparseable override file or unknown/ill-typed key."""


def _parse_value(current, raw: str):
    if isinstance(current, bool):
        if raw not in ("0", "1", "true", "false"):
            raise ValueError(f"expected boolean, got {raw!r}")
        return raw in ("1", "true")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        element = current[0] if current else 0.0
        return tuple(type(element)(v) for v in raw.split(","))
    return raw


def _apply_overrides(config, overrides: dict, prefix: str = ""):
    updates = {}
    for f in fields(config):
        dotted = f"{prefix}{f.name}"
        value = getattr(config, f.name)
        if hasattr(value, "__dataclass_fields__"):
            updates[f.name] = _apply_overrides(value, overrides, prefix=f"{dotted}.")
        elif dotted in overrides:
            try:
                updates[f.name] = _parse_value(value, overrides.pop(dotted))
            except ValueError as exc:
                raise ConfigFileError(f"bad value for {dotted!r}: {exc}") from exc
    return replace(config, **updates)


def load_runtime_config(path=None) -> RuntimeConfig:
    """Built-in defaults, overridden by the key=value file at `path` (or at
    $FUSIONNAV_CONFIG when no path is given)."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    config = RuntimeConfig()
    if path is None:
        return config
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"config file not found: {path}")
    overrides = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigFileError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        overrides[key.strip()] = value.strip()
    config = _apply_overrides(config, overrides)
    if overrides:
        raise ConfigFileError(f"{path}: unknown keys {sorted(overrides)}")
    return config
