"""Experiment configuration: INI files, presets, validation and digests.

A config file has four sections::

    [run]        circuit, seed, duration_s, mode, gate_window_ps,
                 calibration_duration_s, preset (optional base preset)
    [sources]    pair_rate_a_hz, pair_rate_b_hz, fidelity_a, fidelity_b,
                 herald_phase_rad, mode_overlap, tau_c_ps
    [detectors]  efficiency, stray_rate_hz, dark_rate_hz (four values, D1..D4),
                 tau_j_ps, dead_time_ps
    [analysis]   windows_ps, sweep_windows_ps, policy, epsilon, tol,
                 max_iter, bootstrap

Keys missing from a file fall back to the named preset (if any) and then to
the defaults below.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

from .source import CIRCUITS, PhysicsConfig, SimulationError
from .tdc import POLICIES

PRESETS = ("paper-swap", "paper-ghz")
VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    circuit: str = "swap"
    seed: int = 1
    duration_s: float = 36.0
    mode: str = "gated"
    gate_window_ps: int = 1000
    calibration_duration_s: float = 0.0
    pair_rate_a_hz: float = 1e5
    pair_rate_b_hz: float = 1e5
    fidelity_a: float = 1.0
    fidelity_b: float = 1.0
    herald_phase_rad: float = 0.0
    mode_overlap: float = 1.0
    tau_c_ps: float = 230.0
    efficiency: tuple = (1.0, 1.0, 1.0, 1.0)
    stray_rate_hz: tuple = (0.0, 0.0, 0.0, 0.0)
    dark_rate_hz: tuple = (0.0, 0.0, 0.0, 0.0)
    tau_j_ps: float = 85.0
    dead_time_ps: float = 0.0
    windows_ps: tuple = (80,)
    sweep_windows_ps: tuple = (20, 30, 40, 60, 80, 100, 120, 150, 230, 400, 560, 700, 850, 1000)
    policy: str = "closest"
    epsilon: float = 0.1
    tol: float = 1e-10
    max_iter: int = 100_000
    bootstrap: int = 200
    preset: str = ""

    @property
    def n_modes(self) -> int:
        return 2 if self.circuit == "swap" else 3

    def physics(self, duration: float | None = None) -> PhysicsConfig:
        return PhysicsConfig(
            pair_rate_a=self.pair_rate_a_hz,
            pair_rate_b=self.pair_rate_b_hz,
            efficiency=tuple(self.efficiency),
            tau_j=self.tau_j_ps,
            tau_c=self.tau_c_ps,
            stray_rate=tuple(self.stray_rate_hz),
            dark_rate=tuple(self.dark_rate_hz),
            dead_time=self.dead_time_ps,
            duration=self.duration_s if duration is None else duration,
            seed=self.seed,
            fidelity_a=self.fidelity_a,
            fidelity_b=self.fidelity_b,
            herald_phase=self.herald_phase_rad,
            mode_overlap=self.mode_overlap,
        )

    def validate(self) -> "ExperimentConfig":
        if self.circuit not in CIRCUITS:
            raise ConfigError(f"circuit must be one of {CIRCUITS}")
        if self.mode not in ("full", "gated"):
            raise ConfigError("mode must be 'full' or 'gated'")
        if not self.duration_s > 0:
            raise ConfigError("duration_s must be positive")
        if self.calibration_duration_s < 0:
            raise ConfigError("calibration_duration_s must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if not 0 < self.epsilon <= 1 or self.tol <= 0 or self.max_iter < 1:
            raise ConfigError("need 0 < epsilon <= 1, tol > 0, max_iter >= 1")
        if self.bootstrap and self.bootstrap < 100:
            raise ConfigError("bootstrap must be 0 (off) or at least 100")
        for name in ("windows_ps", "sweep_windows_ps"):
            w = getattr(self, name)
            if not w or any(x <= 0 for x in w) or list(w) != sorted(w):
                raise ConfigError(f"{name} must be positive and ascending")
        if self.mode == "gated":
            if self.gate_window_ps <= 0:
                raise ConfigError("gate_window_ps must be positive")
            if max(self.windows_ps) > self.gate_window_ps:
                raise ConfigError("analysis windows exceed the gate window")
        try:
            self.physics().validate(self.circuit)
        except SimulationError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def canonical(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_ini(self) -> str:
        d = self.canonical()
        out = []
        for section, keys in _SECTIONS.items():
            out.append(f"[{section}]")
            for k in keys:
                v = d[k]
                out.append(f"{k} = {', '.join(map(str, v)) if isinstance(v, list) else v}")
            out.append("")
        return "\n".join(out)


_SECTIONS = {
    "run": ("circuit", "preset", "seed", "duration_s", "mode", "gate_window_ps", "calibration_duration_s"),
    "sources": ("pair_rate_a_hz", "pair_rate_b_hz", "fidelity_a", "fidelity_b",
                "herald_phase_rad", "mode_overlap", "tau_c_ps"),
    "detectors": ("efficiency", "stray_rate_hz", "dark_rate_hz", "tau_j_ps", "dead_time_ps"),
    "analysis": ("windows_ps", "sweep_windows_ps", "policy", "epsilon", "tol", "max_iter", "bootstrap"),
}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_QUAD = ("efficiency", "stray_rate_hz", "dark_rate_hz")


def _convert(key: str, raw: str):
    t = _TYPES[key]
    try:
        if key in _QUAD:
            vals = tuple(float(x) for x in raw.split(","))
            if len(vals) == 1:
                vals = vals * 4
            if len(vals) != 4:
                raise ConfigError(f"{key} needs one or four values")
            return vals
        if key in ("windows_ps", "sweep_windows_ps"):
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if t == "int":
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if t == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _parse(text: str, source: str) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            values[key] = _convert(key, raw)
    return values


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("asyncswap").joinpath("presets", f"{name}.cfg").read_text()


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults <- preset <- file <- overrides, then validate."""
    values: dict = {}
    file_values: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        file_values = _parse(text, str(path))
    base = preset or file_values.get("preset")
    if base:
        values.update(_parse(preset_text(base), base))
        values["preset"] = base
    values.update(file_values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = replace(ExperimentConfig(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


__all__ = ["ExperimentConfig", "ConfigError", "load_config", "preset_text", "PRESETS", "VERSION"]
