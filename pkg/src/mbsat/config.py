"""Experiment configuration schema (YAML files validated with pydantic)."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import PRESET_LAMBDAS_DB, InterferenceProfile, preset_profile
from .errors import ConfigError
from .report import fingerprint


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SnrGrid(_Strict):
    """Either an explicit list or ``start``/``stop``/``step`` (stop inclusive)."""

    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    step: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.values is not None:
            if not self.values:
                raise ValueError("SNR grid is empty")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("SNR grid must be strictly increasing")
        elif None in (self.start, self.stop, self.step):
            raise ValueError("give either values or start/stop/step")
        elif self.step <= 0 or self.stop < self.start:
            raise ValueError("empty SNR range")
        return self

    def points(self) -> list[float]:
        if self.values is not None:
            return list(self.values)
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 10) for k in range(n)]


def _grid(v):
    if isinstance(v, list):
        return {"values": v}
    return v


class Scenario(_Strict):
    preset: Optional[str] = "case1"
    lambdas_db: Optional[list[float]] = None
    phase_pi: float = 0.25  # phase of the strongest interferer, in units of pi
    residual_modulations: Optional[dict[int, str]] = None

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v is not None and v not in PRESET_LAMBDAS_DB:
            raise ValueError(f"unknown preset {v!r}; choose from {sorted(PRESET_LAMBDAS_DB)}")
        return v

    @model_validator(mode="after")
    def _one_source(self):
        if self.lambdas_db is not None and self.preset is not None and "preset" in self.model_fields_set:
            raise ValueError("give either preset or lambdas_db, not both")
        return self

    def profile(self) -> InterferenceProfile:
        phase = float(self.phase_pi) * np.pi
        if self.lambdas_db is not None:
            lam = tuple(float(x) for x in self.lambdas_db)
            return InterferenceProfile(lam, (0.0,) * len(lam), name="inline").with_phase(phase)
        return preset_profile(self.preset, phase)


class ModCodEntry(_Strict):
    rate: float = Field(ge=0)
    probability: float = Field(ge=0, le=1)
    modulation: Optional[str] = None


class IrSection(_Strict):
    snr_db: SnrGrid = SnrGrid(start=0.0, stop=15.0, step=1.0)
    strategies: list[Literal["sud", "mud2", "s2", "s3"]] = ["sud", "mud2", "s2", "s3"]
    modulation1: str = "qpsk"
    modulation2: str = "qpsk"
    n_samples: int = Field(100_000, ge=100)
    alpha: float = Field(0.5, gt=0, lt=1)
    rx_offset_db: float = 0.0
    modcods: Optional[list[ModCodEntry]] = None

    @field_validator("snr_db", mode="before")
    @classmethod
    def _as_grid(cls, v):
        return _grid(v)

    @field_validator("strategies")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("no strategies selected")
        return v


class ExitSection(_Strict):
    snr_db: float = 3.0
    strategy: Literal[1, 2] = 2
    mappings: list[Literal["classical", "joint", "remap"]] = ["classical", "joint"]
    modulation: str = "qpsk"
    grid_points: int = Field(11, ge=2)
    n_symbols: int = Field(50_000, ge=100)
    codes: list[str] = ["s2-1/2", "dvb-1/2"]
    thresholds: bool = False
    threshold_lo_db: float = 0.0
    threshold_hi_db: float = 15.0
    threshold_tol_db: float = Field(0.05, gt=0)


class DesignSection(_Strict):
    strategy: Literal[1, 2] = 2
    rate: float = Field(0.5, gt=0, lt=1)
    snr_db: float = 3.0
    mapping: Literal["classical", "joint", "remap"] = "joint"
    modulation: str = "qpsk"
    degrees: list[int] = [2, 3, 4, 6, 8, 10, 12, 20, 30, 50]
    check_degrees: Optional[list[int]] = None
    f_low_step: float = Field(0.05, gt=0, le=0.5)
    max_deg2_fraction: float = Field(0.8, gt=0, le=1)
    grid_points: int = Field(11, ge=2)
    n_symbols: int = Field(20_000, ge=100)
    probe_span_db: float = Field(2.0, ge=0)
    probe_step_db: float = Field(0.25, gt=0)
    reference: list[str] = ["s2-1/2"]


class BuildCodeSection(_Strict):
    n: int = Field(1000, ge=4)
    distribution: str = "s2-1/2"


class CodeSpec(_Strict):
    distribution: Optional[str] = "s2-1/2"
    n: int = Field(1000, ge=4)
    file: Optional[str] = None


class BerSection(_Strict):
    strategy: Literal[1, 2, 3] = 2
    mapping: Literal["classical", "joint", "remap"] = "joint"
    detector: Literal["mud2", "sud"] = "mud2"
    modulation1: str = "qpsk"
    modulation2: str = "qpsk"
    code1: CodeSpec = CodeSpec()
    code2: Optional[CodeSpec] = CodeSpec()
    snr_db: SnrGrid = SnrGrid(values=[2.5, 3.0, 3.5, 4.0])
    min_errors: int = Field(100, ge=1)
    max_bits: int = Field(1_000_000, ge=1)
    target_ber: float = Field(1e-4, gt=0, lt=1)
    max_global_iterations: int = Field(50, ge=1)
    bp_iterations: int = Field(20, ge=1)
    rx_offset_db: Optional[float] = None
    max_log: bool = False

    @field_validator("snr_db", mode="before")
    @classmethod
    def _as_grid(cls, v):
        return _grid(v)


class ExportMappingSection(_Strict):
    kind: Literal["single", "classical", "joint", "remap"] = "joint"
    modulation1: str = "qpsk"
    modulation2: str = "qpsk"


class ExperimentConfig(_Strict):
    seed: int = Field(0, ge=0)
    scenario: Scenario = Scenario()
    ir: IrSection = IrSection()
    exit: ExitSection = ExitSection()
    design: DesignSection = DesignSection()
    build_code: BuildCodeSection = BuildCodeSection()
    ber: BerSection = BerSection()
    export_mapping: ExportMappingSection = ExportMappingSection()

    def fingerprint(self) -> str:
        return fingerprint(self.model_dump(mode="json"))


def default_rx_offset(strategy: int, rate: float) -> float:
    """Metric SNR offset (dB) used by default for the high-rate codes."""
    if rate > 0.5 + 1e-9:
        return {1: -0.5, 2: -0.25}.get(strategy, 0.0)
    return 0.0


def load_config(path=None, seed: int | None = None) -> ExperimentConfig:
    """Read and validate a YAML config; ``seed`` overrides the file's value."""
    data = {}
    if path is not None:
        p = Path(path)
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {p}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    if seed is not None:
        data = dict(data, seed=seed)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
