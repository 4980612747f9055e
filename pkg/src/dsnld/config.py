"""Run configuration schema (TOML on disk, validated before any compute)."""

from __future__ import annotations

import copy
from typing import Annotated, List, Literal, Optional, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .grid import GridSpec
from .noise_env import NoiseModel, uniform_time_grid
from .nonlinearity import NonlinearitySpec
from .particles import InitialLaw, ParticleConfig
from .spde import ConfigError, SolverConfig

EXPERIMENTS = ("representation", "kappa-sweep", "fp-uniqueness", "filter-demo",
               "moment-bounds", "solve-spde", "solve-particles")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -- noise coefficients ----------------------------------------------------

class ZeroCoeff(_Strict):
    kind: Literal["zero"]


class ConstantCoeff(_Strict):
    kind: Literal["constant"]
    value: float


class BumpCoeff(_Strict):
    kind: Literal["gaussian_bump"]
    amplitude: float
    center: float = 0.0
    width: float = 1.0


class SineCoeff(_Strict):
    kind: Literal["sine"]
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0


class SigmoidCoeff(_Strict):
    kind: Literal["sigmoid"]
    amplitude: float
    center: float = 0.0
    width: float = 1.0


Coeff = Annotated[Union[ZeroCoeff, ConstantCoeff, BumpCoeff, SineCoeff, SigmoidCoeff],
                  Field(discriminator="kind")]


class NoiseSection(_Strict):
    drift: Coeff = ZeroCoeff(kind="zero")
    drivers: List[Coeff] = []

    def build(self):
        return NoiseModel.from_params(self.model_dump())


# -- nonlinearity ----------------------------------------------------------

class NonlinearitySection(_Strict):
    kind: Literal["linear", "power_law", "stefan", "table"]
    m: Optional[float] = None
    u_max: Optional[float] = None
    u_c: Optional[float] = None
    slope: float = 1.0
    path: Optional[str] = None
    u: Optional[List[float]] = None
    psi: Optional[List[float]] = None

    @model_validator(mode="after")
    def _required(self):
        need = {"power_law": ["m"], "stefan": ["u_c"]}.get(self.kind, [])
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"nonlinearity.{missing[0]} is required for kind {self.kind!r}")
        if self.kind == "table" and self.path is None and (self.u is None or self.psi is None):
            raise ValueError("table nonlinearity needs either path or u and psi")
        return self

    def build(self, x0_max=None):
        """u_max defaults to twice the initial-density maximum."""
        u_max = self.u_max
        if u_max is None and self.kind in ("power_law", "stefan"):
            u_max = 2.0 * x0_max if x0_max else None
        if self.kind == "linear":
            return NonlinearitySpec.linear()
        if self.kind == "power_law":
            return NonlinearitySpec.power_law(self.m, u_max if u_max else 2.0)
        if self.kind == "stefan":
            return NonlinearitySpec.stefan(self.u_c, self.slope,
                                           max(u_max, 2 * self.u_c) if u_max else None)
        if self.path is not None:
            return NonlinearitySpec.table_from_csv(self.path)
        return NonlinearitySpec.table(self.u, self.psi)


# -- initial law -----------------------------------------------------------

class GaussianInit(_Strict):
    kind: Literal["gaussian"]
    mean: float = 0.0
    sd: float = 1.0


class UniformInit(_Strict):
    kind: Literal["uniform"]
    a: float
    b: float


class BarenblattInit(_Strict):
    kind: Literal["barenblatt"]
    m: float
    t_init: float = 1.0


class TableInit(_Strict):
    kind: Literal["table"]
    xs: List[float]
    density: List[float]


Initial = Annotated[Union[GaussianInit, UniformInit, BarenblattInit, TableInit],
                    Field(discriminator="kind")]


# -- other sections --------------------------------------------------------

class Seeds(_Strict):
    env: int = Field(ge=0, lt=2**64)
    particles: int = Field(ge=0, lt=2**64)
    initial: int = Field(ge=0, lt=2**64)


class GridSection(_Strict):
    half_width: float = 20.0
    n_points: int = 1024

    def build(self):
        return GridSpec(self.half_width, self.n_points)


class TimeSection(_Strict):
    T: float = Field(gt=0)
    dt: float = Field(gt=0)
    snapshots: Optional[List[float]] = None

    def grid(self):
        return uniform_time_grid(self.T, self.dt)

    def snapshot_times(self):
        return list(self.snapshots) if self.snapshots else [self.T]


class SolverSection(_Strict):
    dt: Optional[float] = None
    cfl_safety: float = Field(default=0.9, gt=0, le=1)
    substep_factor: int = Field(default=1, ge=1)
    boundary_tol: float = 1e-6


class ParticlesSection(_Strict):
    count: int = Field(default=100_000, ge=1)
    bandwidth: Union[Literal["silverman"], float] = "silverman"
    ess_floor: float = Field(default=0.0, ge=0, le=1)
    picard_sweeps: int = Field(default=1, ge=1)
    analytic_x0: bool = True


class FPCoefficient(_Strict):
    kind: Literal["constant", "indicator", "gaussian", "harvested"]
    value: float = 0.5
    inside: float = 0.75
    outside: float = 0.25
    a: float = -1.0
    b: float = 1.0
    amplitude: float = 0.5
    width: float = 1.0


class FPSection(_Strict):
    coefficients: List[FPCoefficient] = [FPCoefficient(kind="gaussian"),
                                         FPCoefficient(kind="indicator")]
    levels: int = Field(default=3, ge=3)


class SigmaSection(_Strict):
    base: float = Field(default=1.0, gt=0)
    bump: float = Field(default=0.5, ge=0)
    width: float = Field(default=1.0, gt=0)


class FilterSection(_Strict):
    sigma: SigmaSection = SigmaSection()
    observations: List[Coeff] = [SigmoidCoeff(kind="sigmoid", amplitude=3.0, width=0.5)]
    oracle_samples: int = Field(default=1_000_000, ge=0)
    oracle_substeps: int = Field(default=2, ge=1)


class Tolerances(_Strict):
    representation_l1: float = 0.08
    oracle_l1: float = 1e-2
    particle_oracle_l1: float = 0.08
    kappa_slope: float = 0.8
    fp_l1: float = 1e-2
    filter_l1: float = 0.1
    mc_sigmas: float = 4.0
    monotone_sigmas: float = 1.0


class RunConfig(_Strict):
    experiment: Literal[EXPERIMENTS]
    seeds: Seeds
    nonlinearity: NonlinearitySection = NonlinearitySection(kind="linear")
    noise: NoiseSection = NoiseSection()
    grid: GridSection = GridSection()
    time: TimeSection
    solver: SolverSection = SolverSection()
    initial: Initial = GaussianInit(kind="gaussian")
    particles: ParticlesSection = ParticlesSection()
    kappa: float = Field(default=0.0, ge=0)
    kappa_list: Optional[List[float]] = None
    realizations: int = Field(default=8, ge=1)
    fp: FPSection = FPSection()
    filter: FilterSection = FilterSection()
    tolerances: Tolerances = Tolerances()
    output_dir: str = "out"

    @model_validator(mode="after")
    def _consistency(self):
        if self.solver.dt is not None and abs(self.solver.dt - self.time.dt) > 1e-12 * self.time.dt:
            raise ValueError(
                f"solver.dt={self.solver.dt} differs from the noise time grid dt={self.time.dt}")
        uniform_time_grid(self.time.T, self.time.dt)
        tg = self.time.grid()
        for t in self.time.snapshot_times():
            if min(abs(tg - t)) > 1e-9 * max(1.0, t):
                raise ValueError(f"snapshot time {t} is not on the time grid")
        if self.kappa_list is not None:
            ks = self.kappa_list
            if any(b >= a for a, b in zip(ks, ks[1:])):
                raise ValueError("kappa_list must be strictly descending")
            if any(k < 0 for k in ks):
                raise ValueError("kappa_list entries must be >= 0")
        if self.experiment == "kappa-sweep" and (self.kappa_list is None or len(self.kappa_list) < 4):
            raise ValueError("kappa-sweep needs kappa_list with at least 4 entries")
        GridSpec(self.grid.half_width, self.grid.n_points)
        return self

    # builders ------------------------------------------------------------

    def grid_spec(self):
        return self.grid.build()

    def initial_law(self):
        return InitialLaw.from_params(self.initial.model_dump())

    def nonlinearity_spec(self):
        return self.nonlinearity.build(self.initial_law().max_density())

    def noise_model(self):
        return self.noise.build()

    def solver_config(self, grid=None, substep_factor=None):
        return SolverConfig(grid or self.grid_spec(), self.time.dt, self.solver.cfl_safety,
                            substep_factor or self.solver.substep_factor, self.solver.boundary_tol)

    def particle_config(self):
        p = self.particles
        return ParticleConfig(p.count, self.seeds.particles, self.seeds.initial, p.bandwidth,
                              p.ess_floor, p.picard_sweeps, p.analytic_x0)

    def echo(self):
        return self.model_dump(mode="json")


def _format_error(err):
    e = err.errors()[0]
    loc = ".".join(str(x) for x in e["loc"])
    if e["type"] == "extra_forbidden":
        return f"unknown field '{loc}'"
    if e["type"] == "missing":
        return f"missing required field '{loc}'"
    return f"{loc}: {e['msg']}" if loc else e["msg"]


def parse_config(data):
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _coerce_scalar(text):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(data, overrides):
    """Apply ``dotted.key=value`` overrides to a raw config dict."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override inside non-table field {key!r}")
        node[parts[-1]] = _coerce_scalar(text.strip())
    return data


def load_config(path, overrides=()):
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    return parse_config(apply_overrides(data, overrides))
