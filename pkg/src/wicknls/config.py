"""Experiment configuration: one JSON document, validated field by field."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator

from .errors import ValidationError
from .spectra import InitialProfile, ResonantQuadrature


class ProfileConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    amplitude: float = 1.0
    x_decay: float = Field(math.pi, gt=0)
    k_decay: float = Field(2.0, gt=0)
    k0: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def build(self) -> InitialProfile:
        return InitialProfile(self.amplitude, self.x_decay, self.k_decay, tuple(self.k0))


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radial: int = Field(16, ge=1)
    polar: int = Field(8, ge=1)
    azimuth: int = Field(12, ge=1)
    plane_radial: int = Field(16, ge=1)
    plane_angle: int = Field(12, ge=1)
    rcut: float | None = Field(None, gt=0)
    time_order: int = Field(16, ge=1)

    def build(self) -> ResonantQuadrature:
        return ResonantQuadrature(self.radial, self.polar, self.azimuth, self.plane_radial, self.plane_angle,
                                  self.rcut, self.time_order)


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k_max: float = Field(1.5, gt=0)
    m: int = Field(17, ge=2)
    x_extent: float | None = None
    x_points: int | None = None
    zeta_extent: float | None = None
    zeta_points: int | None = None


class ExperimentConfig(BaseModel):
    """All knobs of one run.  ``lambda`` and ``epsilon`` are derived from ``L``, ``alpha`` and ``beta``."""

    model_config = ConfigDict(extra="forbid")

    d: int = Field(3, ge=1, le=3)
    L_sweep: list[float] = Field(default_factory=lambda: [4.0, 8.0, 16.0])
    alpha: float = 1.0
    beta: float = math.inf
    T: float = Field(0.25, gt=0)
    dt: float = Field(0.125, gt=0)
    t: float = Field(1.0, ge=0)
    order: int = Field(1, ge=0)
    k: tuple[float, ...] = (0.0, 0.0, 0.0)
    radius: float | None = Field(None, gt=0)
    nsamples: int = Field(10_000, ge=1)
    scheme: Literal["RK4", "Picard"] = "RK4"
    variant: Literal["W", "E"] = "W"
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    seeds: list[int] = Field(default_factory=lambda: [0])
    threads: int = Field(1, ge=1)
    out: str = "out"

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: float) -> float:
        if not 0 < v < 2:
            raise ValueError(f"alpha = {v} must lie in the open interval (0, 2)")
        return v

    @model_validator(mode="after")
    def _scaling(self) -> "ExperimentConfig":
        if self.beta < self.alpha:
            raise ValueError(f"beta = {self.beta} must satisfy alpha <= beta")
        if any(L <= 0 for L in self.L_sweep):
            raise ValueError("every L in L_sweep must be positive")
        if len(self.k) != self.d:
            raise ValueError(f"k must have d = {self.d} components")
        return self

    def lam(self, L: float) -> float:
        """Nonlinearity strength ``L^(-alpha/2)``."""
        return float(L) ** (-self.alpha / 2)

    def epsilon(self, L: float) -> float:
        """Envelope scale ``L^(-beta)`` (0 in the homogeneous case)."""
        return 0.0 if math.isinf(self.beta) else float(L) ** (-self.beta)

    @property
    def regime(self) -> str:
        if math.isinf(self.beta):
            return "homogeneous"
        return "inhomogeneous" if self.beta == self.alpha else "semi-homogeneous"

    @property
    def seed(self) -> int:
        return self.seeds[0]

    def canonical(self) -> str:
        """Sorted JSON of every field that can change a result (``out`` and ``threads`` cannot)."""
        data = self.model_dump(mode="json", exclude={"out", "threads"})
        return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)

    def hash(self) -> str:
        """Short content hash carried by every output."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _format_errors(err: PydanticValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "config"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def build_config(data: dict[str, Any] | None = None, **overrides: Any) -> ExperimentConfig:
    """Validate ``data`` with ``overrides`` applied (``None`` overrides are ignored)."""
    merged = dict(data or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(merged)
    except PydanticValidationError as err:
        raise ValidationError(_format_errors(err)) from None


def load_config(path: str | Path | None, **overrides: Any) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ValidationError(f"cannot read config {path}: {err}") from None
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
    return build_config(data, **overrides)


__all__ = ["ExperimentConfig", "ProfileConfig", "QuadratureConfig", "GridConfig", "build_config", "load_config"]
