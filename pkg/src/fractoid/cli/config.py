"""Experiment configuration: JSON (or TOML on Python 3.11+) plus
``--set key=value`` overrides; flags win over the file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..geometry import chart_from_json, get_chart

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    tomllib = None

KNOWN_SUITES = ("nelson-ho", "wiener-meanderiv", "sphere-geometry",
                "geodesic-variational", "whitenoise-cov", "dirac-algebra",
                "fractal-dim", "feynman-kac")


@dataclass
class ExperimentConfig:
    suite: str = ""
    chart: str = "euclidean:1"
    epsilon: float = 1.0
    drift: str = "zero"
    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    n_paths: int = 0               # 0 = suite default (see suites.DEFAULT_PATHS)
    t_final: float = 1.0
    dt: float = 0.01
    x0: list | None = None         # start point; None = chart default
    seed: int | None = None
    min_count: int = 200
    lag: int = 1
    causal_split: str = "off"
    est_t_bins: int = 4
    est_x_min: float = -2.0
    est_x_max: float = 2.0
    est_x_bins: int = 16
    lattice_t: float = 1.0
    lattice_dt: float = 0.125
    lattice_l: float = 1.0
    lattice_dx: float = 0.25
    lattice_d: int = 2
    out_dir: str = "."

    def validate(self, need_suite: bool = False) -> None:
        if self.seed is None:
            raise ConfigError("config key 'seed' is required (no implicit randomness)")
        try:
            resolve_chart(self.chart)
        except ConfigError as exc:
            raise ConfigError(f"config key 'chart': {exc}") from None
        make_drift(self.drift, self.omega)  # raises ConfigError on bad names
        if self.n_paths < 0:
            raise ConfigError("config key 'n_paths' must be >= 0 (0 = suite default)")
        if need_suite and self.suite not in KNOWN_SUITES:
            raise ConfigError(f"unknown suite '{self.suite}'; available: "
                              + ", ".join(KNOWN_SUITES))

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_chart(name: str):
    """Registry name, or a path to a custom diagonal-metric JSON description."""
    if name.endswith(".json"):
        if not Path(name).exists():
            raise ConfigError(f"custom chart file not found: {name}")
        return chart_from_json(name)
    return get_chart(name)


def make_drift(name: str, omega: float = 1.0):
    """Drift registry: zero, ou (rate omega), const:v0[,v1,...]."""
    name = name.strip()
    if name == "zero":
        return None
    if name == "ou":
        return lambda t, x: -omega * x
    if name.startswith("const:"):
        try:
            vec = np.array([float(v) for v in name.split(":", 1)[1].split(",")])
        except ValueError:
            raise ConfigError(f"bad constant drift '{name}'") from None
        return lambda t, x: np.broadcast_to(vec, x.shape)
    raise ConfigError(f"unknown drift '{name}'; available: zero, ou, const:v0[,v1,..]")


def _coerce(field_type, raw: str):
    if field_type in ("int", int):
        return int(raw)
    if field_type in ("float", float):
        return float(raw)
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw


def load_config(path: str | None, overrides: list[str] | None = None,
                **direct) -> ExperimentConfig:
    """Read the config file, then apply --set overrides and direct kwargs."""
    data: dict = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        text = p.read_text(encoding="utf8")
        if p.suffix == ".toml":
            if tomllib is None:
                raise ConfigError("TOML configs need Python >= 3.11; use JSON")
            data = tomllib.loads(text)
        else:
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"cannot parse config {path}: {exc}") from None
    valid = {f.name: f for f in fields(ExperimentConfig)}
    for key in data:
        if key not in valid:
            raise ConfigError(f"unknown config key '{key}'")
    cfg_kwargs = dict(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in valid:
            raise ConfigError(f"unknown config key '{key}' in --set")
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            parsed = raw
        cfg_kwargs[key] = parsed
    for key, value in direct.items():
        if value is not None:
            cfg_kwargs[key] = value
    # re-coerce numerics that arrived as strings
    out = {}
    for key, value in cfg_kwargs.items():
        ftype = valid[key].type
        if isinstance(value, str) and ftype in ("int", "float", "int | None"):
            try:
                value = int(value) if "int" in str(ftype) else float(value)
            except ValueError:
                raise ConfigError(f"config key '{key}' expects a number, got '{value}'")
        out[key] = value
    try:
        return ExperimentConfig(**out)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
