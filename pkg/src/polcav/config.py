"""Run configuration: a JSON object of flat blocks.

All frequencies are ordinary frequencies in Hz; conversion to rad/s happens
in :meth:`SystemConfig.to_system`. Keys carry no unit suffixes, and unknown
keys are rejected so that ``"kappa_khz": 52`` cannot slip through as a
silently ignored typo.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import TWO_PI, MechanicalMode
from .errors import ParseError, ValidationError
from .twomode import TwoModeSystem


@dataclass(frozen=True)
class SystemConfig:
    kappa: float = 52e3
    splitting: float = 82.4e3
    p_h: float = 2.19e-6
    p_v: float = 1.85e-6
    wavelength: float = 1064e-9
    eta: float = 1.0
    g0: float = 1.6
    omega_m: float = 222e3
    gamma_m: float = 19.0
    m_eff: float = 100e-12
    t_bath: float = 300.0
    quantum_bath: bool = False

    def validate(self):
        for key in ("kappa", "splitting", "wavelength", "omega_m", "gamma_m", "m_eff"):
            _positive(key, getattr(self, key))
        for key in ("p_h", "p_v", "g0", "t_bath"):
            _non_negative(key, getattr(self, key))
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError("eta", "must lie in [0, 1]")

    def mechanical_mode(self) -> MechanicalMode:
        return MechanicalMode(TWO_PI * self.omega_m, TWO_PI * self.gamma_m, self.m_eff, self.t_bath)

    def to_system(self, detuning_hz=0.0) -> TwoModeSystem:
        return TwoModeSystem.from_parameters(
            TWO_PI * self.kappa, TWO_PI * self.splitting, self.p_h, self.p_v,
            TWO_PI * self.g0, self.mechanical_mode(),
            wavelength=self.wavelength, eta=self.eta, detuning_ref=TWO_PI * detuning_hz,
        )


@dataclass(frozen=True)
class SweepConfig:
    start: float = -150e3
    stop: float = 250e3
    step: float = 1e3

    def validate(self):
        _finite("start", self.start)
        _finite("stop", self.stop)
        _positive("step", self.step)
        if self.stop < self.start:
            raise ValidationError("stop", "must not be below start")

    def grid_hz(self):
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class SynthesisConfig:
    detuning: float = -100e3
    noise_fraction: float = 0.0
    seed: int = 0
    span_fwhm: float = 20.0
    bins_per_fwhm: float = 40.0
    offset: float = 0.0

    def validate(self):
        _finite("detuning", self.detuning)
        _non_negative("noise_fraction", self.noise_fraction)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed", "must be a non-negative integer")
        _positive("span_fwhm", self.span_fwhm)
        _positive("bins_per_fwhm", self.bins_per_fwhm)
        _non_negative("offset", self.offset)


@dataclass(frozen=True)
class ThermometryConfig:
    n: float | None = 1.0
    ratio: float | None = None
    detuning: float | None = None

    def validate(self):
        if (self.n is None) == (self.ratio is None):
            raise ValidationError("n", "give exactly one of n or ratio")
        if self.n is not None:
            _non_negative("n", self.n)
        if self.ratio is not None:
            _positive("ratio", self.ratio)
        if self.detuning is not None:
            _finite("detuning", self.detuning)


@dataclass(frozen=True)
class CurvatureConfig:
    map: str | None = None
    r_max: float = 15e-6
    angle_step: float = 5.0
    length: float = 0.05

    def validate(self):
        _positive("r_max", self.r_max)
        _positive("angle_step", self.angle_step)
        _positive("length", self.length)


BLOCKS = {
    "system": SystemConfig,
    "sweep": SweepConfig,
    "synthesis": SynthesisConfig,
    "thermometry": ThermometryConfig,
    "curvature": CurvatureConfig,
}


@dataclass(frozen=True)
class Config:
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    thermometry: ThermometryConfig = field(default_factory=ThermometryConfig)
    curvature: CurvatureConfig = field(default_factory=CurvatureConfig)

    def validate(self):
        for name in BLOCKS:
            getattr(self, name).validate()
        return self

    def to_dict(self):
        return asdict(self)


def _positive(key, value):
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(key, f"must be > 0, got {value!r}")


def _non_negative(key, value):
    if not (math.isfinite(value) and value >= 0):
        raise ValidationError(key, f"must be >= 0, got {value!r}")


def _finite(key, value):
    if not math.isfinite(value):
        raise ValidationError(key, f"must be finite, got {value!r}")


NULLABLE = {"n", "ratio", "detuning"}


def _coerce(block_cls, key, value):
    if key == "quantum_bath":
        if not isinstance(value, bool):
            raise ValidationError(key, "must be true or false")
        return value
    if key == "map":
        if value is not None and not isinstance(value, str):
            raise ValidationError(key, "must be a file path")
        return value
    if value is None and key in NULLABLE and block_cls is ThermometryConfig:
        return None
    if key == "seed":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(key, "must be an integer")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(key, f"must be a number, got {value!r}")
    return float(value)


def config_from_dict(data) -> Config:
    if not isinstance(data, dict):
        raise ParseError("configuration must be a JSON object")
    blocks = {}
    for name, body in data.items():
        if name not in BLOCKS:
            raise ValidationError(name, "unknown configuration block")
        if not isinstance(body, dict):
            raise ParseError(f"block {name!r} must be a JSON object")
        cls = BLOCKS[name]
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in body.items():
            if key not in known:
                raise ValidationError(key, f"unknown key in block {name!r}")
            kwargs[key] = _coerce(cls, key, value)
        if name == "thermometry" and "ratio" in kwargs and "n" not in kwargs:
            kwargs["n"] = None
        blocks[name] = cls(**kwargs)
    return Config(**blocks).validate()


def parse_config(text) -> Config:
    """Parse and validate configuration text.

    Raises
    ------
    ParseError
        Malformed JSON or wrong structure.
    ValidationError
        Unknown key or out-of-range value; ``.key`` names the entry.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return config_from_dict(data)


def serialize_config(config: Config) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
