"""Flat key = value config files mapping onto the system/trajectory settings.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Trajectory keys are dotted (trajectory.kind, estimated_trajectory.amplitude_m);
everything else matches a SystemConfig field or a run-level key (trials, seed).
CLI flags override file values, which override the built-in macro-cell defaults.
"""

from __future__ import annotations

import math
from dataclasses import fields

from .channel import SystemConfig, TrajectoryConfig


class ConfigError(ValueError):
    """Malformed config file or inconsistent values."""


_SYS_FIELDS = {f.name: f.type for f in fields(SystemConfig)}
_TRAJ_FIELDS = {f.name: f.type for f in fields(TrajectoryConfig)}
_RUN_KEYS = {"trials", "seed"}
_INT_SYS = {"n_antennas", "frames", "slots_per_frame", "rng_seed"}


def default_system_config() -> SystemConfig:
    return SystemConfig()


def default_trajectory_config() -> TrajectoryConfig:
    return TrajectoryConfig(kind="straight_line", min_bs_distance_m=150.0, amplitude_m=0.0)


def default_estimated_trajectory_config(amplitude_m: float = 5.0) -> TrajectoryConfig:
    return TrajectoryConfig(
        kind="cosine_perturbed",
        min_bs_distance_m=150.0,
        amplitude_m=amplitude_m,
        cycle_s=math.pi,
    )


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> value strings; duplicate keys keep the last occurrence."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        out[key] = value
    return out


def load_config_file(path: str):
    """Read a config file into (SystemConfig, trajectory, estimated, run dict)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = parse_config_text(fh.read())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return build_configs(raw)


def build_configs(raw: dict[str, str]):
    sys_kwargs: dict = {}
    traj_kwargs: dict = {}
    est_kwargs: dict = {}
    run: dict = {}
    for key, value in raw.items():
        if key in _SYS_FIELDS:
            sys_kwargs[key] = _coerce_sys(key, value)
        elif key.startswith("trajectory."):
            traj_kwargs[_traj_field(key)] = _coerce_traj(_traj_field(key), value, key)
        elif key.startswith("estimated_trajectory."):
            est_kwargs[_traj_field(key)] = _coerce_traj(_traj_field(key), value, key)
        elif key in _RUN_KEYS:
            run[key] = _parse_int(key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        sys_cfg = SystemConfig(**sys_kwargs)
        traj = TrajectoryConfig(**{**_as_kwargs(default_trajectory_config()), **traj_kwargs})
        est = TrajectoryConfig(
            **{**_as_kwargs(default_estimated_trajectory_config()), **est_kwargs}
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err
    return sys_cfg, traj, est, run


def _as_kwargs(cfg: TrajectoryConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(TrajectoryConfig)}


def _traj_field(key: str) -> str:
    name = key.split(".", 1)[1]
    if name not in _TRAJ_FIELDS:
        raise ConfigError(f"unknown trajectory key {key!r}")
    return name


def _coerce_sys(key: str, value: str):
    if key in _INT_SYS:
        return _parse_int(key, value)
    return _parse_float(key, value)


def _coerce_traj(name: str, value: str, key: str):
    if name == "kind":
        return value
    if name == "speed_mps" and value.lower() in ("none", "unset"):
        return None
    return _parse_float(key, value)


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"{key}: expected integer, got {value!r}") from err


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as err:
        raise ConfigError(f"{key}: expected number, got {value!r}") from err


def dump_config(sys_cfg: SystemConfig, traj: TrajectoryConfig, est: TrajectoryConfig) -> str:
    """Render settings back to the file format (for --write-config)."""
    lines = ["# system"]
    for f in fields(SystemConfig):
        lines.append(f"{f.name} = {getattr(sys_cfg, f.name)}")
    for prefix, cfg in (("trajectory", traj), ("estimated_trajectory", est)):
        lines.append(f"# {prefix}")
        for f in fields(TrajectoryConfig):
            val = getattr(cfg, f.name)
            lines.append(f"{prefix}.{f.name} = {val if val is not None else 'none'}")
    return "\n".join(lines) + "\n"
