"""Run manifests: INI configuration in, fully resolved and checksummed record out.

A manifest has four sections, ``[beam]``, ``[mesh]``, ``[integrator]`` and
``[experiment]``, plus an informational ``[manifest]`` block written on
output. Every key name is unique across sections, so command-line overrides
may be given as ``key=value`` or ``section.key=value``.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import __version__
from .integrator import IntegratorConfig
from .model import PRESETS, BeamConfig, InitialData, MIN_CELLS


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentParams:
    """Settings of the experiment subcommands.

    ``probe_scheme``, ``probe_rtol`` and ``probe_atol`` replace the
    ``[integrator]`` values for the critical-velocity probes and the
    steady-state stability check, which only need the trend of a run.
    """

    t_end: float = 1.0
    U_lo: float = 500.0
    U_hi: float = 800.0
    tol_U: float = 2.0
    horizon: float = 2.0
    window: float = 0.5
    band: float = 1e-2
    min_r2: float = 0.9
    probe_scheme: str = "bdf2"
    probe_rtol: float = 1e-5
    probe_atol: float = 1e-8
    continuation: str = "b"
    continuation_step: float = 5.0
    steady_tol: float = 1e-10
    confirm: bool = True
    confirm_horizon: float = 5.0
    perturbation: float = 1e-3
    tail_fraction: float = 0.5
    cycle_rel_tol: float = 0.01
    cycle_floor: float = 1e-6
    axis: str = "U"
    values: tuple[float, ...] = ()
    outputs: tuple[str, ...] = ("final_E", "growth", "cycle")
    workers: int = 1

    def __post_init__(self):
        positive = ("t_end", "tol_U", "horizon", "window", "continuation_step", "steady_tol",
                    "confirm_horizon", "tail_fraction", "cycle_rel_tol", "probe_rtol", "probe_atol")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)!r}")
        if not 0 <= self.U_lo < self.U_hi:
            raise ConfigError("U_lo: need 0 <= U_lo < U_hi")
        if self.continuation not in ("b", "U", "none"):
            raise ConfigError(f"continuation: expected b, U or none, got {self.continuation!r}")
        if self.axis not in ("U", "k", "b", "b0"):
            raise ConfigError(f"axis: expected one of U, k, b, b0, got {self.axis!r}")
        if self.probe_scheme not in ("average-acceleration", "bdf2"):
            raise ConfigError(f"probe_scheme: unknown scheme {self.probe_scheme!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if not all(math.isfinite(v) for v in self.values):
            raise ConfigError("values: must be finite")


@dataclass(frozen=True)
class RunManifest:
    beam: BeamConfig = field(default_factory=BeamConfig)
    n_cells: int = 100
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    version: str = __version__

    @property
    def checksum(self) -> str:
        return hashlib.sha256(_body(self).encode()).hexdigest()

    def probe_integrator(self) -> IntegratorConfig:
        e = self.experiment
        return self.integrator.with_(scheme=e.probe_scheme, rtol=e.probe_rtol, atol=e.probe_atol)


# ---------------------------------------------------------------- flat views of the nested configs

_BEAM_KEYS = ("ell", "k", "mu", "U", "lambda_flag", "b", "b0", "pressure")
_INIT_KEYS = {"init_preset": "preset", "init_amplitude": "amplitude", "u0": "u0", "u1": "u1"}


def _section_values(m: RunManifest) -> dict[str, dict[str, object]]:
    beam = {key: getattr(m.beam, key) for key in _BEAM_KEYS}
    beam.update({key: getattr(m.beam.init, attr) for key, attr in _INIT_KEYS.items()})
    return {
        "beam": beam,
        "mesh": {"n_cells": m.n_cells},
        "integrator": dataclasses.asdict(m.integrator),
        "experiment": dataclasses.asdict(m.experiment),
    }


_DEFAULTS = _section_values(RunManifest())
_SECTION_OF = {key: sec for sec, keys in _DEFAULTS.items() for key in keys}


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _kind(section: str, key: str) -> str:
    if key in ("pressure",):
        return "scalar-or-list"
    if key in ("u0", "u1", "values"):
        return "float-list"
    if key == "outputs":
        return "str-list"
    default = _DEFAULTS[section][key]
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "float"
    return "str"


def _parse_value(section: str, key: str, text: str):
    kind = _kind(section, key)
    text = text.strip()
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if kind == "float-list":
            if not text:
                return None if key in ("u0", "u1") else ()
            return tuple(float(v) for v in text.split(","))
        if kind == "str-list":
            return tuple(v.strip() for v in text.split(",") if v.strip())
        if kind == "scalar-or-list":
            parts = [float(v) for v in text.split(",")]
            return parts[0] if len(parts) == 1 else tuple(parts)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind}") from None


def _build(values: dict[str, dict[str, object]], version: str) -> RunManifest:
    b = values["beam"]
    try:
        init = InitialData(preset=b["init_preset"], amplitude=b["init_amplitude"], u0=b["u0"], u1=b["u1"])
    except ValueError as exc:
        raise ConfigError(f"init_preset: {exc}") from None
    try:
        beam = BeamConfig(init=init, **{key: b[key] for key in _BEAM_KEYS})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n_cells = values["mesh"]["n_cells"]
    if n_cells < MIN_CELLS:
        raise ConfigError(f"n_cells: need at least {MIN_CELLS}, got {n_cells}")
    try:
        integ = IntegratorConfig(**values["integrator"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunManifest(beam, n_cells, integ, ExperimentParams(**values["experiment"]), version)


def _split_override(item: str) -> tuple[str, str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    name, text = item.split("=", 1)
    name = name.strip()
    section, _, key = name.rpartition(".")
    if section:
        if section not in _DEFAULTS:
            raise ConfigError(f"{name}: unknown section {section!r}")
        if key not in _DEFAULTS[section]:
            raise ConfigError(f"{key}: unknown key in [{section}]")
    elif key in _SECTION_OF:
        section = _SECTION_OF[key]
    else:
        raise ConfigError(f"{key}: unknown key")
    return section, key, text


def parse_config(path: str | Path | None = None, overrides: Iterable[str] = (),
                 text: str | None = None) -> RunManifest:
    """Read an INI file (or ``text``), apply ``key=value`` overrides, fill defaults.

    Raises
    ------
    ConfigError
        Missing file, unknown section or key, unreadable value, or a value
        that violates a constraint. The message starts with the key.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # U and u must stay distinct
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config: file not found: {p}")
        text = p.read_text()
    try:
        parser.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None

    values = {sec: dict(keys) for sec, keys in _DEFAULTS.items()}
    version = __version__
    for section in parser.sections():
        if section == "manifest":
            version = parser[section].get("version", version)
            continue
        if section not in values:
            raise ConfigError(f"[{section}]: unknown section")
        for key, raw in parser[section].items():
            if key not in values[section]:
                raise ConfigError(f"{key}: unknown key in [{section}]")
            values[section][key] = _parse_value(section, key, raw)
    for item in overrides:
        section, key, raw = _split_override(item)
        values[section][key] = _parse_value(section, key, raw)
    return _build(values, version)


def _body(m: RunManifest) -> str:
    lines = []
    for section, keys in _section_values(m).items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {_format(value)}" for key, value in keys.items())
        lines.append("")
    return "\n".join(lines)


def emit(m: RunManifest) -> str:
    """INI text that :func:`parse_config` reads back to an equal manifest."""
    return _body(m) + f"[manifest]\nversion = {m.version}\nchecksum = {m.checksum}\n"


def from_configs(beam: BeamConfig | None = None, n_cells: int = 100,
                 integrator: IntegratorConfig | None = None, **experiment) -> RunManifest:
    return RunManifest(beam or BeamConfig(), n_cells, integrator or IntegratorConfig(),
                       ExperimentParams(**experiment))


__all__: typing.Sequence[str] = ("ConfigError", "ExperimentParams", "RunManifest", "emit", "from_configs",
                                 "parse_config", "PRESETS")
