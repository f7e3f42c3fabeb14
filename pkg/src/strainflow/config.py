"""Run configuration: flat key = value files, env overrides, CLI overrides.

Precedence (lowest to highest): built-in defaults, config file, process
environment (STRAINFLOW_<KEY>), explicit CLI --key value flags.
Config files hold one `key = value` per line; `#` starts a comment.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

from .exceptions import ConfigError
from .solver import SolverConfig

ENV_PREFIX = "STRAINFLOW_"


@dataclass
class RunConfig:
    n: int = 32
    viscosity: float = 1.0
    dt: float = 1e-3
    adaptive_cfl: bool = False
    t_end: float = 1.0
    dealias: bool = True
    record_every: int = 10
    initial_data: str = "taylor_green"
    seed: int = 1
    max_wavenumber: int | None = None
    amplitude: float = 1.0
    initial_file: str | None = None
    force: str = "none"
    q_list: tuple = (math.inf, 2.0, 1.5)
    csv: str = "diagnostics.csv"
    snapshot_dir: str | None = None
    snapshot_every: int = 0

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n=self.n, viscosity=self.viscosity, dt=self.dt,
                            t_end=self.t_end, dealias=self.dealias,
                            adaptive_cfl=self.adaptive_cfl,
                            record_every=self.record_every, force=self.force)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_q(text: str) -> float:
    lowered = text.strip().lower()
    if lowered in ("inf", "infinity", "qinf"):
        return math.inf
    return float(lowered)


def _parse_q_list(text: str) -> tuple:
    return tuple(_parse_q(part) for part in text.split(",") if part.strip())


def _parse_optional_int(text: str):
    if text.strip().lower() in ("", "none"):
        return None
    return int(text)


def _parse_optional_str(text: str):
    return text if text.strip().lower() not in ("", "none") else None


_PARSERS = {
    "n": int,
    "viscosity": float,
    "dt": float,
    "adaptive_cfl": _parse_bool,
    "t_end": float,
    "dealias": _parse_bool,
    "record_every": int,
    "initial_data": str,
    "seed": int,
    "max_wavenumber": _parse_optional_int,
    "amplitude": float,
    "initial_file": _parse_optional_str,
    "force": str,
    "q_list": _parse_q_list,
    "csv": str,
    "snapshot_dir": _parse_optional_str,
    "snapshot_every": int,
}


def parse_config_file(path) -> dict:
    """Parse a flat key = value file into raw string settings."""
    raw = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line.strip()!r}")
        key, _, value = text.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        raw[key] = value.strip()
    return raw


def env_overrides(environ=None) -> dict:
    """Settings taken from STRAINFLOW_<KEY> environment variables."""
    environ = os.environ if environ is None else environ
    raw = {}
    for key in _PARSERS:
        value = environ.get(ENV_PREFIX + key.upper())
        if value is not None:
            raw[key] = value
    return raw


def build_config(config_path=None, cli_overrides=None, environ=None) -> RunConfig:
    """Assemble a RunConfig from file, environment, and CLI layers."""
    raw = {}
    if config_path is not None:
        raw.update(parse_config_file(config_path))
    raw.update(env_overrides(environ))
    if cli_overrides:
        for key, value in cli_overrides.items():
            if key not in _PARSERS:
                raise ConfigError(f"unknown setting {key!r}")
            if value is not None:
                raw[key] = value
    settings = {}
    for key, value in raw.items():
        if key == "dt" and str(value).strip().lower() == "auto":
            settings["adaptive_cfl"] = True
            continue
        try:
            settings[key] = _PARSERS[key](str(value))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    known = {f.name for f in fields(RunConfig)}
    assert set(settings) <= known
    config = RunConfig(**settings)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.n < 8 or config.n % 2:
        raise ConfigError(f"n must be an even integer >= 8, got {config.n}")
    if config.viscosity <= 0 or config.dt <= 0 or config.t_end <= 0:
        raise ConfigError("viscosity, dt, and t_end must be positive")
    if config.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if config.snapshot_every < 0:
        raise ConfigError("snapshot_every must be >= 0")
    if config.initial_data not in ("taylor_green", "shear", "random_div_free", "from_file"):
        raise ConfigError(f"unknown initial_data {config.initial_data!r}")
    if config.initial_data == "from_file" and not config.initial_file:
        raise ConfigError("initial_data=from_file requires initial_file")
    for q in config.q_list:
        if q < 1.5:
            raise ConfigError(f"q_list entries must be >= 1.5, got {q}")
