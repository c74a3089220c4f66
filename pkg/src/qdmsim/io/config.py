"""Run configuration: line-oriented sectioned key=value text with unit
suffixes, e.g.

    [experiment]
    b_dc = 0.8 mT
    ac_frequency = 300 kHz

Unknown keys and malformed lines are rejected with line numbers.
"""
from dataclasses import dataclass, field

import numpy as np

from ..instrument import (DEFAULT_SIGNAL_SIGMA, ExperimentConfig,
                          MagnetScene, NoiseModel)
from ..spin import ACFieldSpec, XYSequence
from .errors import ConfigError

_UNIT_SCALE = {
    "": 1.0,
    "t": 1.0, "mt": 1e-3, "ut": 1e-6, "nt": 1e-9, "pt": 1e-12,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9,
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9,
    "rad": 1.0, "deg": np.pi / 180.0,
    "um^3": 1e-18, "m^3": 1.0,
    "px": 1.0,
}

_SCHEMA = {
    "scene": {
        "n", "pitch", "diameter", "thickness", "chi_real", "chi_imag",
        "response_volume", "moment_slope", "moment_intercept",
    },
    "experiment": {
        "b_dc", "ac_amplitude", "ac_frequency", "order", "n_pulses",
        "rabi_frequency", "standoff", "width", "height", "pixel_size",
        "contrast", "baseline", "pulse_model", "detuning",
        "ac_during_pulses", "delta_points", "delta_min", "delta_max",
        "seed", "b_dc_max",
    },
    "noise": {"field_sigma", "signal_sigma", "t2"},
    "analysis": {"bg_kernel", "cut_half_span", "fit_failure_limit"},
}

_DEFAULTS = {
    ("scene", "n"): 3,
    ("scene", "pitch"): 25e-6,
    ("scene", "diameter"): 5.8e-6,
    ("scene", "thickness"): 30e-9,
    ("scene", "chi_real"): 138.0,
    ("scene", "chi_imag"): 0.0,
    ("scene", "response_volume"): 3.17e-18,
    ("scene", "moment_slope"): 129e-15 / 1e-3,
    ("scene", "moment_intercept"): -14e-15,
    ("experiment", "b_dc"): 0.8e-3,
    ("experiment", "ac_amplitude"): 3.5e-6,
    ("experiment", "ac_frequency"): 300e3,
    ("experiment", "order"): 8,
    ("experiment", "n_pulses"): 8,
    ("experiment", "rabi_frequency"): 2.7e6,
    ("experiment", "standoff"): 6e-6,
    ("experiment", "width"): 70,
    ("experiment", "height"): 70,
    ("experiment", "pixel_size"): 1e-6,
    ("experiment", "contrast"): 0.10,
    ("experiment", "baseline"): 0.0,
    ("experiment", "pulse_model"): "rate",
    ("experiment", "detuning"): True,
    ("experiment", "ac_during_pulses"): True,
    ("experiment", "delta_points"): 25,
    ("experiment", "delta_min"): -0.5 * np.pi,
    ("experiment", "delta_max"): 0.5 * np.pi,
    ("experiment", "seed"): 7,
    ("experiment", "b_dc_max"): 5e-3,
    ("noise", "field_sigma"): 120e-9,
    ("noise", "signal_sigma"): DEFAULT_SIGNAL_SIGMA,
    ("noise", "t2"): 21e-6,
    ("analysis", "bg_kernel"): 50,
    ("analysis", "cut_half_span"): 12e-6,
    ("analysis", "fit_failure_limit"): 0.02,
}

_INT_KEYS = {("scene", "n"), ("experiment", "order"),
             ("experiment", "n_pulses"), ("experiment", "width"),
             ("experiment", "height"), ("experiment", "delta_points"),
             ("experiment", "seed"), ("analysis", "bg_kernel")}
_STR_KEYS = {("experiment", "pulse_model")}
_BOOL_KEYS = {("experiment", "detuning"), ("experiment", "ac_during_pulses")}


def _parse_value(section, key, text, where):
    if (section, key) in _STR_KEYS:
        return text.strip()
    if (section, key) in _BOOL_KEYS:
        val = text.strip().lower()
        if val in ("on", "true", "yes", "1"):
            return True
        if val in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"{where}: boolean key {key!r} got {text!r}")
    parts = text.split()
    if not parts:
        raise ConfigError(f"{where}: empty value for {key!r}")
    try:
        num = float(parts[0])
    except ValueError:
        raise ConfigError(f"{where}: cannot parse number {parts[0]!r}")
    unit = parts[1].lower() if len(parts) > 1 else ""
    if unit not in _UNIT_SCALE:
        raise ConfigError(f"{where}: unknown unit {parts[1]!r}")
    num *= _UNIT_SCALE[unit]
    if (section, key) in _INT_KEYS:
        if num != int(num):
            raise ConfigError(f"{where}: key {key!r} must be an integer")
        return int(num)
    return num


@dataclass
class RunConfig:
    """Parsed configuration; missing keys fall back to the paper-default
    experiment."""

    values: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text, name="<config>"):
        values = dict(_DEFAULTS)
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{name}:{lineno}"
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError(f"{where}: malformed section header")
                section = line[1:-1].strip().lower()
                if section not in _SCHEMA:
                    raise ConfigError(f"{where}: unknown section "
                                      f"[{section}]")
                continue
            if "=" not in line:
                raise ConfigError(f"{where}: expected key = value")
            if section is None:
                raise ConfigError(f"{where}: key outside any [section]")
            key, _, val = line.partition("=")
            key = key.strip().lower()
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key {key!r} in "
                                  f"[{section}]")
            values[(section, key)] = _parse_value(section, key, val, where)
        return cls(values)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.parse(fh.read(), name=str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")

    def __getitem__(self, section_key):
        return self.values[section_key]

    def scene(self):
        v = self.values
        return MagnetScene.grid(
            n=v[("scene", "n")],
            pitch=v[("scene", "pitch")],
            diameter=v[("scene", "diameter")],
            thickness=v[("scene", "thickness")],
            chi_v=complex(v[("scene", "chi_real")], v[("scene", "chi_imag")]),
            response_volume=v[("scene", "response_volume")],
            moment_slope=v[("scene", "moment_slope")],
            moment_intercept=v[("scene", "moment_intercept")],
        )

    def experiment(self, seed=None):
        v = self.values
        rabi_omega = 2 * np.pi * v[("experiment", "rabi_frequency")]
        ac = ACFieldSpec(v[("experiment", "ac_amplitude")],
                         v[("experiment", "ac_frequency")], 0.0)
        seq = XYSequence.matched(
            ac.frequency, n_pulses=v[("experiment", "n_pulses")],
            order=v[("experiment", "order")], rabi_omega=rabi_omega)
        noise = NoiseModel(field_sigma=v[("noise", "field_sigma")],
                           signal_sigma=v[("noise", "signal_sigma")],
                           t2=v[("noise", "t2")])
        try:
            return ExperimentConfig(
                b_dc=v[("experiment", "b_dc")],
                ac=ac, sequence=seq, rabi_omega=rabi_omega,
                standoff=v[("experiment", "standoff")],
                width=v[("experiment", "width")],
                height=v[("experiment", "height")],
                pixel_size=v[("experiment", "pixel_size")],
                noise=noise,
                seed=v[("experiment", "seed")] if seed is None else seed,
                contrast=v[("experiment", "contrast")],
                baseline=v[("experiment", "baseline")],
                pulse_model=v[("experiment", "pulse_model")],
                ac_during_pulses=v[("experiment", "ac_during_pulses")],
                detuning_enabled=v[("experiment", "detuning")],
                b_dc_bounds=(0.0, v[("experiment", "b_dc_max")]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc))

    def delta_grid(self):
        v = self.values
        return np.linspace(v[("experiment", "delta_min")],
                           v[("experiment", "delta_max")],
                           v[("experiment", "delta_points")])
