"""
Experiment configuration (JSON, ``schema_version: 1``).

Times are in seconds; ``timing.value``/``timing.max_abs`` are in units of T.
SNR is the average symbol energy of r(t), ``E_s = E[s^2] * int p^2 dt``,
divided by the integrator noise PSD sigma^2 (noise variance sigma^2 * dt per
integration step).  ``noise.psd`` sets sigma^2 directly; ``noise.snr_db``
derives it.  Leave both unset for a noiseless link.
"""

from __future__ import annotations

import json
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, TemlinkError
from .if_tem import TemParams
from .timing import NewtonConfig
from .waveform import Constellation, PulseShape, effective_pilot_length, make_pulse, \
    pam_constellation

__all__ = ["ExperimentConfig", "load_config", "parse_config", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
DETECTORS = ("zf", "ml_bruteforce", "spike_count")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstellationSection(_Section):
    M: int = 4
    average_energy: float = Field(1.0, gt=0)


class PulseSection(_Section):
    kind: Literal["rectangular", "triangular", "rrc"] = "rrc"
    rolloff: float = Field(0.5, ge=0, le=1)
    memory: int = Field(4, ge=0)


class FrameSection(_Section):
    pilot_length: int = Field(12, ge=1)
    data_length: int = Field(16, ge=1)
    symbol_period: float = Field(1.0, gt=0)
    pilots: Optional[List[float]] = None
    pilot_seed: int = Field(0, ge=0)


class TemSection(_Section):
    kappa: float = Field(1.0, gt=0)
    delta: float = Field(1.0, gt=0)
    bias: float = Field(2.5, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    tolerance: Optional[float] = Field(None, gt=0)


class NoiseSection(_Section):
    snr_db: Optional[float] = None
    psd: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def _one_of(self):
        if self.snr_db is not None and self.psd is not None:
            raise ValueError("set at most one of noise.snr_db and noise.psd")
        return self


class TimingSection(_Section):
    mode: Literal["fixed", "uniform"] = "uniform"
    value: float = Field(0.0, ge=-0.5, le=0.5)
    max_abs: float = Field(0.5, ge=0, le=0.5)


class EstimatorSection(_Section):
    n_guess: int = Field(8, ge=2)
    max_iterations: int = Field(50, ge=1)
    step_tolerance: float = Field(1e-10, gt=0)
    damping: float = Field(1.0, gt=0, le=1)


class SweepSection(_Section):
    axis: Literal["snr", "effective_pilot_length", "n_guess"] = "snr"
    values: List[float] = Field(default_factory=list)


class ExperimentConfig(_Section):
    schema_version: Literal[1]
    constellation: ConstellationSection = ConstellationSection()
    pulse: PulseSection = PulseSection()
    frame: FrameSection = FrameSection()
    tem: TemSection = TemSection()
    noise: NoiseSection = NoiseSection()
    timing: TimingSection = TimingSection()
    estimator: EstimatorSection = EstimatorSection()
    detectors: List[Literal["zf", "ml_bruteforce", "spike_count"]] = ["zf", "spike_count"]
    trials: int = Field(100, ge=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    sweep: Optional[SweepSection] = None

    @model_validator(mode="after")
    def _consistent(self):
        try:
            self.build_constellation()
            pulse = self.build_pulse()
            effective_pilot_length(self.frame.pilot_length, pulse.memory)
            self.build_tem()
        except TemlinkError as exc:
            raise ValueError(str(exc)) from None
        if self.frame.pilots is not None:
            if len(self.frame.pilots) != self.frame.pilot_length:
                raise ValueError("frame.pilots length must equal frame.pilot_length")
            if not self.build_constellation().contains(self.frame.pilots, atol=1e-9):
                raise ValueError("frame.pilots must be constellation points")
        return self

    # builders -----------------------------------------------------------

    def build_constellation(self) -> Constellation:
        return pam_constellation(self.constellation.M, self.constellation.average_energy)

    def build_pulse(self) -> PulseShape:
        p = self.pulse
        return make_pulse(p.kind, self.frame.symbol_period, p.rolloff, p.memory)

    def build_tem(self) -> TemParams:
        t = self.tem
        return TemParams(kappa=t.kappa, delta=t.delta, bias=t.bias,
                         tolerance=t.tolerance, dt=t.dt)

    def build_newton(self) -> NewtonConfig:
        e = self.estimator
        return NewtonConfig(n_guess=e.n_guess, max_iterations=e.max_iterations,
                            step_tolerance=e.step_tolerance, damping=e.damping)

    def pilots(self) -> np.ndarray:
        c = self.build_constellation()
        if self.frame.pilots is not None:
            return c.points[c.index_of(self.frame.pilots)]
        rng = np.random.default_rng(self.frame.pilot_seed)
        return rng.choice(c.points, size=self.frame.pilot_length)

    def noise_psd(self) -> float:
        if self.noise.psd is not None:
            return self.noise.psd
        if self.noise.snr_db is None:
            return 0.0
        return self.symbol_energy() / 10 ** (self.noise.snr_db / 10)

    def symbol_energy(self) -> float:
        return self.constellation.average_energy * self.build_pulse().energy

    def updated(self, **sections) -> "ExperimentConfig":
        """Copy with whole sections or fields replaced, re-validated."""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key] = {**(data.get(key) or {}), **value}
            else:
                data[key] = value
        return ExperimentConfig.model_validate(data)


def parse_config(data) -> ExperimentConfig:
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "schema_version" not in data:
        raise ConfigError("config is missing the required 'schema_version' field")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
