"""Scenario configuration: pydantic models, YAML loading, problem builders.

A scenario fixes the density, the discretization, the forcing (sparse Fourier
component lists so the data amplitude is analytically controllable), solver
knobs and output options.  Loading either returns a fully validated
:class:`ScenarioConfig` or fails with a field-precise error.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import basis as sb
from . import hysteresis as hy
from . import solver as sv
from .errors import ConfigurationError

__all__ = [
    "ScenarioConfig",
    "load_config",
    "config_from_dict",
    "build_density",
    "build_problem",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UniformDensityConfig(_Strict):
    family: Literal["uniform"]
    value: float = Field(1.0, ge=0)
    span: float = Field(8.0, gt=0)
    R: float = Field(..., gt=0)
    r_cap_hint: Optional[float] = Field(None, gt=0)
    memory_nodes: int = Field(64, ge=8)
    validation_grid: int = Field(201, ge=21)


class GaussianDensityConfig(_Strict):
    family: Literal["gaussian"]
    amplitude: float = Field(1.0, gt=0)
    decay: float = Field(1.0, gt=0)
    r_max: float = Field(8.0, gt=0)
    R: float = Field(..., gt=0)
    r_cap_hint: Optional[float] = Field(None, gt=0)
    memory_nodes: int = Field(64, ge=8)
    validation_grid: int = Field(201, ge=21)


class ExponentialDensityConfig(_Strict):
    family: Literal["exponential"]
    amplitude: float = Field(1.0, gt=0)
    r_rate: float = Field(1.0, gt=0)
    v_rate: float = Field(1.0, gt=0)
    R: float = Field(..., gt=0)
    r_cap_hint: Optional[float] = Field(None, gt=0)
    memory_nodes: int = Field(64, ge=8)
    validation_grid: int = Field(201, ge=21)


class TabulatedDensityConfig(_Strict):
    family: Literal["tabulated"]
    r_grid: list[float]
    v_grid: list[float]
    values: list[list[float]]
    R: float = Field(..., gt=0)
    r_cap_hint: Optional[float] = Field(None, gt=0)
    memory_nodes: int = Field(64, ge=8)
    validation_grid: int = Field(201, ge=21)


DensityConfig = Union[
    UniformDensityConfig, GaussianDensityConfig, ExponentialDensityConfig, TabulatedDensityConfig
]


class BasisConfig(_Strict):
    L: float = Field(1.0, gt=0)
    a: float = Field(1.0, gt=0)
    m: int = Field(8, ge=1)
    n_t: int = Field(256, ge=4)
    n_quad: int = Field(64, ge=4)

    @model_validator(mode="after")
    def _resolution(self):
        if self.n_t < 2 * self.m + 2:
            raise ValueError(f"n_t={self.n_t} under-resolves {2 * self.m + 1} time modes")
        if self.n_quad < 2 * self.m + 2:
            raise ValueError(f"n_quad={self.n_quad} aliases products of m={self.m} spatial modes")
        return self


class FComponent(_Strict):
    j: int
    k: int = Field(..., ge=1)
    amplitude: float


class HComponent(_Strict):
    j: int
    l: int = Field(..., ge=0)
    amplitude: float


class PStarComponent(_Strict):
    j: int
    end: Literal["left", "right"]
    amplitude: float


class DataConfig(_Strict):
    f: list[FComponent] = Field(default_factory=list)
    h: list[HComponent] = Field(default_factory=list)
    p_star: list[PStarComponent] = Field(default_factory=list)
    gamma: tuple[float, float] = (1.0, 1.0)
    amplitude_scale: float = 1.0
    declared_delta: Optional[float] = None

    @field_validator("gamma")
    @classmethod
    def _gamma_admissible(cls, g):
        if g[0] < 0 or g[1] < 0 or g[0] + g[1] <= 0:
            raise ValueError("gamma endpoint values must be nonnegative with a positive sum")
        return g


class SolverConfig(_Strict):
    alpha_schedule: list[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    damping: float = Field(0.5, gt=0, le=1)
    tol_res: float = Field(1e-8, gt=0)
    max_iterations: int = Field(200, ge=1)
    max_refinements: int = Field(6, ge=0)

    @field_validator("alpha_schedule")
    @classmethod
    def _schedule(cls, sched):
        if sched != sorted(sched) or sched[-1] != 1.0 or sched[0] < 0.0:
            raise ValueError("alpha_schedule must ascend within [0, 1] and end at 1.0")
        return sched


class OutputConfig(_Strict):
    probes: list[float] = Field(default_factory=list)
    probe_series: bool = True
    report_name: str = "report.json"
    norms_name: str = "norms.csv"
    probes_name: str = "probes.csv"
    sweep_name: str = "sweep.csv"


class ScenarioConfig(_Strict):
    density: DensityConfig = Field(..., discriminator="family")
    basis: BasisConfig = Field(default_factory=BasisConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: int = 0

    @model_validator(mode="after")
    def _probes_inside_domain(self):
        for xp in self.output.probes:
            if not 0.0 <= xp <= self.basis.L:
                raise ValueError(f"probe position {xp} outside the domain [0, {self.basis.L}]")
        return self

    def effective_dict(self):
        """Round-trippable configuration with all defaults applied."""
        return self.model_dump(mode="json")


def config_from_dict(raw):
    """Validate a plain dict into a ScenarioConfig (pydantic errors are field-precise)."""
    return ScenarioConfig.model_validate(raw)


def load_config(path):
    """Load a YAML scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} does not contain a mapping")
    return config_from_dict(raw)


def build_density(cfg):
    """Instantiate the density from its config section (not yet validated)."""
    d = cfg.density
    if d.family == "uniform":
        return hy.PreisachDensity.uniform(value=d.value, span=d.span, R=d.R, r_cap_hint=d.r_cap_hint)
    if d.family == "gaussian":
        return hy.PreisachDensity.gaussian(
            amplitude=d.amplitude, decay=d.decay, r_max=d.r_max, R=d.R, r_cap_hint=d.r_cap_hint
        )
    if d.family == "exponential":
        return hy.PreisachDensity.exponential(
            amplitude=d.amplitude, r_rate=d.r_rate, v_rate=d.v_rate, R=d.R, r_cap_hint=d.r_cap_hint
        )
    return hy.PreisachDensity.tabulated(d.r_grid, d.v_grid, d.values, R=d.R, r_cap_hint=d.r_cap_hint)


def build_problem(cfg, amplitude_scale=None):
    """Construct the validated density, bases and sampled problem data.

    Raises DensityValidationError when the density fails its admissibility
    checks and ConfigurationError when a declared amplitude disagrees with
    the one computed from the realized data.
    """
    density = build_density(cfg)
    hy.validate_density(density, grid=cfg.density.validation_grid)
    basis = sb.build_spatial_basis(L=cfg.basis.L, a=cfg.basis.a, m=cfg.basis.m, n_quad=cfg.basis.n_quad)
    modes = sb.build_time_modes(cfg.basis.m, cfg.basis.n_t)
    scale = cfg.data.amplitude_scale if amplitude_scale is None else amplitude_scale
    end_index = {"left": 0, "right": 1}
    data = sv.ProblemData.from_components(
        basis,
        modes,
        density,
        gamma=np.array(cfg.data.gamma, dtype=float),
        f_components=[(c.j, c.k, c.amplitude) for c in cfg.data.f],
        h_components=[(c.j, c.l, c.amplitude) for c in cfg.data.h],
        p_star_components=[(c.j, end_index[c.end], c.amplitude) for c in cfg.data.p_star],
        scale=scale,
    )
    if cfg.data.declared_delta is not None and amplitude_scale is None:
        declared = cfg.data.declared_delta
        if abs(data.delta - declared) > 1e-3 * max(abs(declared), abs(data.delta), 1e-300):
            raise ConfigurationError(
                f"data.declared_delta={declared} disagrees with the computed amplitude {data.delta}"
            )
    return density, basis, modes, data
