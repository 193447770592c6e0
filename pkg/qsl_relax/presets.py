"""Run configuration: parameter presets, JSON config files and layering.

Values are layered lowest priority first: preset, JSON config file, command
line flags. The output directory falls back to ``QSL_OUT_DIR`` and finally
``./qsl-out``.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .core import BlochVector, RelaxationParams
from .errors import ConfigError, DomainError

J_HZ = 209.1
DEFAULT_OUT_DIR = "qsl-out"
OUT_DIR_ENV = "QSL_OUT_DIR"
MIN_POINTS = 16


@dataclass(frozen=True)
class Preset:
    """Named parameter set for one Fe(acac)3 concentration.

    Attributes:
        name: Preset key such as ``"20mM-sim"``.
        concentration_mM: Paramagnetic concentration in mM.
        T1H: Hydrogen T1 in seconds.
        T2C: Carbon T2 in seconds.
        J: Scalar coupling in hertz.
        source: ``"sim"`` (fitted through simulation) or ``"meas"`` (measured).
    """

    name: str
    concentration_mM: float
    T1H: float
    T2C: float
    J: float = J_HZ
    source: str = "sim"

    @property
    def params(self) -> RelaxationParams:
        """Return the preset as ``RelaxationParams``."""
        return RelaxationParams(self.T1H, self.T2C, self.J)


PRESETS: dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("20mM-sim", 20.0, 7.1e-3, 38.55e-3),
        Preset("120mM-sim", 120.0, 1.15e-3, 12.8e-3),
        Preset("300mM-sim", 300.0, 0.425e-3, 5.49e-3),
        Preset("20mM-meas", 20.0, 12e-3, 480e-3, source="meas"),
        Preset("120mM-meas", 120.0, 1.7e-3, 87e-3, source="meas"),
        Preset("300mM-meas", 300.0, 0.63e-3, 29e-3, source="meas"),
    )
}
ALIASES = {"20mM": "20mM-sim", "120mM": "120mM-sim", "300mM": "300mM-sim"}


def get_preset(name: str) -> Preset:
    """Look up a preset by name or bare alias.

    Raises:
        ConfigError: If the name is unknown.
    """
    key = ALIASES.get(name, name)
    try:
        return PRESETS[key]
    except KeyError:
        known = ", ".join([*PRESETS, *ALIASES])
        raise ConfigError(f"unknown preset {name!r} (known: {known})") from None


@dataclass(frozen=True)
class InitialState:
    """Initial carbon Bloch components in the x–z plane."""

    x0: float = 1.0 / math.sqrt(2.0)
    z0: float = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Grid:
    """Uniform time grid ``linspace(0, t_max, n_points)``."""

    t_max: float = 0.15
    n_points: int = 2000


@dataclass(frozen=True)
class Quadrature:
    """Path-length quadrature tolerances."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-13


@dataclass(frozen=True)
class Smoothing:
    """Local-polynomial smoothing window and degree."""

    window: int = 11
    degree: int = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs to run.

    ``params`` is None only for runs on an ingested series, which need the
    initial state but no model constants.
    """

    params: RelaxationParams | None = None
    initial_state: InitialState = field(default_factory=InitialState)
    grid: Grid = field(default_factory=Grid)
    quadrature: Quadrature = field(default_factory=Quadrature)
    smoothing: Smoothing = field(default_factory=Smoothing)
    crossover_noise_floor: float = 1e-4
    revival_threshold: float = 1e-3
    trotter_dt: float = 1e-5
    output_dir: str = DEFAULT_OUT_DIR
    preset: str | None = None

    def validate(self) -> RunConfig:
        """Check the invariants and return ``self``.

        Raises:
            ConfigError: On the first invalid field.
        """
        g = self.grid
        if not (math.isfinite(g.t_max) and g.t_max > 0):
            raise ConfigError(f"grid.t_max must be > 0, got {g.t_max!r}")
        if g.n_points < MIN_POINTS:
            raise ConfigError(
                f"grid.n_points must be >= {MIN_POINTS}, got {g.n_points}"
            )
        q = self.quadrature
        if not (q.rel_tol > 0 and q.abs_tol > 0):
            raise ConfigError("quadrature tolerances must be positive")
        for name in ("crossover_noise_floor", "revival_threshold"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.trotter_dt > 0:
            raise ConfigError("trotter_dt must be positive")
        s = self.smoothing
        if s.window < 5 or s.window % 2 == 0 or not 2 <= s.degree <= 4:
            raise ConfigError(
                "smoothing needs an odd window >= 5 and a degree in [2, 4]"
            )
        try:
            self.bloch()
        except DomainError as exc:
            raise ConfigError(f"initial_state: {exc}") from exc
        return self

    def bloch(self) -> BlochVector:
        """Return the initial carbon state."""
        return BlochVector(self.initial_state.x0, 0.0, self.initial_state.z0)

    def times(self) -> NDArray[np.float64]:
        """Return the analysis grid."""
        return np.linspace(0.0, self.grid.t_max, self.grid.n_points)

    def require_params(self) -> RelaxationParams:
        """Return the model constants.

        Raises:
            ConfigError: If none were configured.
        """
        if self.params is None:
            raise ConfigError("no relaxation parameters: give --preset or params")
        return self.params

    def to_dict(self) -> dict[str, Any]:
        """Return the config in the JSON file layout."""
        p = self.params
        return {
            "preset": self.preset,
            "params": None if p is None else {"T1H": p.T1H, "T2C": p.T2C, "J": p.J},
            "initial_state": {"x0": self.initial_state.x0, "z0": self.initial_state.z0},
            "grid": {"t_max": self.grid.t_max, "n_points": self.grid.n_points},
            "quadrature": {
                "rel_tol": self.quadrature.rel_tol,
                "abs_tol": self.quadrature.abs_tol,
            },
            "smoothing": {
                "window": self.smoothing.window,
                "degree": self.smoothing.degree,
            },
            "crossover_noise_floor": self.crossover_noise_floor,
            "revival_threshold": self.revival_threshold,
            "trotter_dt": self.trotter_dt,
            "output_dir": self.output_dir,
        }


_SECTIONS: dict[str, tuple[str, ...]] = {
    "params": ("T1H", "T2C", "J"),
    "initial_state": ("x0", "z0"),
    "grid": ("t_max", "n_points"),
    "quadrature": ("rel_tol", "abs_tol"),
    "smoothing": ("window", "degree"),
}
_SCALARS = (
    "preset",
    "crossover_noise_floor",
    "revival_threshold",
    "trotter_dt",
    "output_dir",
)
_INTS = {"n_points", "window", "degree"}


def _number(key: str, value: Any) -> float | int:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if key in _INTS:
        if int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def read_config_file(path: str) -> dict[str, Any]:
    """Read and shape-check a JSON config file.

    Returns:
        dict[str, Any]: The parsed mapping (unvalidated values).

    Raises:
        ConfigError: If the file is unreadable, not JSON, or has unknown keys.
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = set(data) - set(_SECTIONS) - set(_SCALARS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for section, keys in _SECTIONS.items():
        sub = data.get(section)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be an object")
        extra = set(sub) - set(keys)
        if extra:
            raise ConfigError(
                f"unknown keys in {section}: {', '.join(sorted(extra))}"
            )
    return data


def _apply(cfg: RunConfig, values: Mapping[str, Any]) -> RunConfig:
    """Overlay a (file-shaped) mapping onto ``cfg``; None values are skipped."""
    changes: dict[str, Any] = {}
    for section, keys in _SECTIONS.items():
        sub = values.get(section) or {}
        picked = {k: _number(k, sub[k]) for k in keys if sub.get(k) is not None}
        if not picked:
            continue
        if section == "params":
            base = cfg.params
            merged = {
                "T1H": base.T1H if base else None,
                "T2C": base.T2C if base else None,
                "J": base.J if base else J_HZ,
                **picked,
            }
            if merged["T1H"] is None or merged["T2C"] is None:
                raise ConfigError("params needs both T1H and T2C")
            try:
                changes["params"] = RelaxationParams(**merged)
            except DomainError as exc:
                raise ConfigError(f"params: {exc}") from exc
        else:
            changes[section] = replace(getattr(cfg, section), **picked)
    for key in ("crossover_noise_floor", "revival_threshold", "trotter_dt"):
        if values.get(key) is not None:
            changes[key] = _number(key, values[key])
    if values.get("output_dir") is not None:
        changes["output_dir"] = str(values["output_dir"])
    return replace(cfg, **changes)


def _from_preset(name: str) -> RunConfig:
    preset = get_preset(name)
    return RunConfig(params=preset.params, preset=preset.name)


def build_config(
    preset: str | None = None,
    config_path: str | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Layer preset, config file, flag overrides and environment into a RunConfig.

    Args:
        preset: Preset named on the command line (wins over the file's).
        config_path: Optional JSON config file.
        overrides: File-shaped mapping of flag values; None entries are ignored.
        env: Environment for the ``QSL_OUT_DIR`` fallback (defaults to os.environ).

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigError: On unknown presets, bad files or invalid values.
    """
    file_values = read_config_file(config_path) if config_path else {}
    name = preset or file_values.get("preset")
    cfg = _from_preset(str(name)) if name else RunConfig()
    cfg = _apply(cfg, file_values)
    flags = dict(overrides or {})
    cfg = _apply(cfg, flags)
    if file_values.get("output_dir") is None and flags.get("output_dir") is None:
        environ = os.environ if env is None else env
        cfg = replace(cfg, output_dir=environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)
    return cfg.validate()
