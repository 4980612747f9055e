"""Quenched grid solver for the stochastic porous media equation

    dX = 1/2 d^2 psi_kappa(X) dt + X mu(dt, xi)

and for the linear Fokker-Planck SPDE dz = d^2(a z) dt + z mu(dt, xi).

Both use Lie splitting per macro step: an explicit, CFL-substepped
conservative diffusion step followed by the exact multiplicative noise step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import DensityField, GridSpec, boundary_mass_fraction
from .noise_env import log_doleans_increment
from .nonlinearity import psi_kappa_eval

log = logging.getLogger(__name__)


class DomainTooSmallError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec
    dt: float
    cfl_safety: float = 0.9
    substep_factor: int = 1
    boundary_tol: float = 1e-6
    scheme: str = "explicit_substepped"

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if self.substep_factor < 1:
            raise ConfigError("substep_factor must be >= 1")
        if self.scheme != "explicit_substepped":
            raise ConfigError(f"unsupported scheme {self.scheme!r}")

    def check_time_grid(self, real):
        if not np.allclose(real.dt, self.dt, rtol=1e-9, atol=0.0):
            raise ConfigError(
                f"solver dt={self.dt} does not match the noise realization's time grid")


@dataclass
class Trajectory:
    """Snapshots of one quenched run plus solver metadata."""

    times: list
    fields: list
    meta: dict = field(default_factory=dict)

    def at(self, t, tol=1e-9):
        for s, f in zip(self.times, self.fields):
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")

    @property
    def final(self):
        return self.fields[-1]


def _laplacian(v, dxi):
    return (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / (dxi * dxi)


def max_psi_slope(spec, kappa, lo, hi, n=257):
    """Largest divided difference of psi_kappa on [lo, hi] (slightly extended)."""
    if hi <= lo:
        return _point_slope(spec, kappa, lo)
    pad = (hi - lo) / (n - 1)
    u = np.linspace(lo - pad, hi + pad, n + 2)
    slopes = np.diff(psi_kappa_eval(spec, kappa, u)) / np.diff(u)
    return float(np.max(np.abs(slopes)))


def _point_slope(spec, kappa, u0, h=1e-6):
    u = np.array([u0 - h, u0 + h])
    p = psi_kappa_eval(spec, kappa, u)
    return float(abs(p[1] - p[0]) / (2 * h))


def _diffuse_psi(values, grid, spec, kappa, dt, cfl_safety, substep_factor=1):
    v = np.array(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return v, 0
    slope = max_psi_slope(spec, kappa, lo, hi)
    if slope == 0.0:
        return v, 0
    dxi = grid.dxi
    dt_max = cfl_safety * dxi * dxi / slope
    nsub = int(np.ceil(dt / dt_max - 1e-12)) * substep_factor
    h = dt / nsub
    for _ in range(nsub):
        v = v + 0.5 * h * _laplacian(psi_kappa_eval(spec, kappa, v), dxi)
    return v, nsub


def diffusion_step(field, spec, kappa, dt, cfl_safety=0.9, substep_factor=1):
    """Advance dX/dt = 1/2 d^2 psi_kappa(X) over dt with explicit substeps."""
    if not np.all(np.isfinite(field.values)):
        raise FloatingPointError("non-finite field passed to diffusion_step")
    v, _ = _diffuse_psi(field.values, field.grid, spec, kappa, dt, cfl_safety, substep_factor)
    return DensityField(field.grid, v, field.time_stamp + dt)


def noise_factor_on_grid(model, real, n, grid):
    return np.exp(log_doleans_increment(model, real, n, grid.nodes))


def noise_step_exact(field, model, real, n):
    """Exact solution of dX = X mu(dt, xi) over step n, node by node."""
    f = noise_factor_on_grid(model, real, n, field.grid)
    dt = real.time_grid[n + 1] - real.time_grid[n]
    return DensityField(field.grid, field.values * f, field.time_stamp + dt)


class _GridNoise:
    """Coefficient values at the grid nodes, cached across steps."""

    def __init__(self, model, real, grid):
        xi = grid.nodes
        self.real = real
        self.e0 = None if model.drift.is_zero() else model.drift(xi)
        self.es = [(i, c(xi)) for i, c in enumerate(model.drivers) if not c.is_zero()]

    def factor(self, n):
        real = self.real
        dt = real.time_grid[n + 1] - real.time_grid[n]
        lg = 0.0
        for i, e in self.es:
            lg = lg + e * real.increments[n, i] - 0.5 * e * e * dt
        if self.e0 is not None:
            lg = lg + self.e0 * dt
        return np.exp(lg)


def _snapshot_indices(real, snapshot_times):
    if snapshot_times is None:
        return list(range(real.n_steps + 1))
    return sorted({real.index_of(t) for t in snapshot_times})


def _clamp(v):
    neg = v < 0
    if not neg.any():
        return v, 0.0
    deficit = float(-v[neg].sum())
    v = np.where(neg, 0.0, v)
    return v, deficit


def solve_spde(config, spec, kappa, model, real, x0, snapshot_times=None):
    """Lie-split quenched solve on the realization's time grid.

    ``snapshot_times=None`` stores every macro step.
    """
    config.check_time_grid(real)
    if x0.grid != config.grid:
        raise ConfigError("initial field is not on the solver grid")
    if np.any(x0.values < 0) or not np.isfinite(x0.mass):
        raise ValueError("initial field must be nonnegative with finite mass")
    keep = set(_snapshot_indices(real, snapshot_times))
    noise = _GridNoise(model, real, config.grid)
    v = np.array(x0.values, dtype=float)
    times, fields = [], []
    if 0 in keep:
        times.append(0.0)
        fields.append(DensityField(config.grid, v, 0.0))
    substeps, deficits, boundary = [], [], []
    for n in range(real.n_steps):
        dt = real.time_grid[n + 1] - real.time_grid[n]
        v, nsub = _diffuse_psi(v, config.grid, spec, kappa, dt,
                               config.cfl_safety, config.substep_factor)
        v = v * noise.factor(n)
        v, deficit = _clamp(v)
        substeps.append(nsub)
        deficits.append(deficit * config.grid.dxi)
        t = real.time_grid[n + 1]
        snap = DensityField(config.grid, v, t)
        bfrac = boundary_mass_fraction(snap)
        boundary.append(bfrac)
        if bfrac > config.boundary_tol:
            raise DomainTooSmallError(
                f"boundary mass fraction {bfrac:.3g} > {config.boundary_tol:g} at t={t:g}; "
                f"enlarge half_width={config.grid.half_width}")
        if n + 1 in keep:
            times.append(float(t))
            fields.append(snap)
    meta = {
        "substeps_total": int(np.sum(substeps)),
        "substeps_max": int(np.max(substeps)) if substeps else 0,
        "clamp_deficit_total": float(np.sum(deficits)),
        "boundary_fraction_max": float(np.max(boundary)) if boundary else 0.0,
    }
    return Trajectory(times, fields, meta)


# --------------------------------------------------------------------------
# Fokker-Planck SPDE with a given coefficient field
# --------------------------------------------------------------------------


class CoefficientField:
    """a(t, xi) >= 0, queried per macro step on arbitrary nodes.

    ``fn(step, xi)`` must return an array shaped like ``xi``.
    """

    def __init__(self, fn, description="custom"):
        self.fn = fn
        self.description = description

    def __call__(self, step, xi):
        a = np.asarray(self.fn(step, xi), dtype=float)
        if a.shape != np.shape(xi):
            a = np.broadcast_to(a, np.shape(xi)).astype(float)
        return a

    @classmethod
    def constant(cls, value):
        return cls(lambda n, xi: np.full(np.shape(xi), float(value)), f"constant({value})")

    @classmethod
    def from_function(cls, f, description="function"):
        return cls(lambda n, xi: f(xi), description)

    @classmethod
    def from_snapshots(cls, xi_nodes, table, description="tabulated"):
        """Piecewise-constant in time, linear in space; ``table[n]`` used on step n."""
        table = np.asarray(table, dtype=float)
        xi_nodes = np.asarray(xi_nodes, dtype=float)

        def fn(n, xi):
            row = table[min(n, len(table) - 1)]
            return np.interp(xi, xi_nodes, row)

        return cls(fn, description)


def _diffuse_product(z, a, grid, dt, cfl_safety, substep_factor=1):
    amax = float(a.max())
    if amax == 0.0:
        return z, 0
    dxi = grid.dxi
    dt_max = cfl_safety * dxi * dxi / (2.0 * amax)
    nsub = int(np.ceil(dt / dt_max - 1e-12)) * substep_factor
    h = dt / nsub
    for _ in range(nsub):
        z = z + h * _laplacian(a * z, dxi)
    return z, nsub


def solve_fokker_planck(config, a_field, model, real, z0, snapshot_times=None,
                        check_boundary=True):
    """Quenched solve of dz = d^2(a z) dt + z mu(dt, xi) (no 1/2 in front)."""
    config.check_time_grid(real)
    grid = config.grid
    if z0.grid != grid:
        raise ConfigError("initial field is not on the solver grid")
    keep = set(_snapshot_indices(real, snapshot_times))
    noise = _GridNoise(model, real, grid)
    xi = grid.nodes
    z = np.array(z0.values, dtype=float)
    times, fields = [], []
    if 0 in keep:
        times.append(0.0)
        fields.append(DensityField(grid, z, 0.0))
    substeps = []
    for n in range(real.n_steps):
        a = a_field(n, xi)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError(f"coefficient a must be finite and >= 0 (step {n})")
        dt = real.time_grid[n + 1] - real.time_grid[n]
        z, nsub = _diffuse_product(z, a, grid, dt, config.cfl_safety, config.substep_factor)
        z = z * noise.factor(n)
        substeps.append(nsub)
        t = real.time_grid[n + 1]
        snap = DensityField(grid, z, t)
        if check_boundary:
            bfrac = boundary_mass_fraction(snap)
            if bfrac > config.boundary_tol:
                raise DomainTooSmallError(
                    f"boundary mass fraction {bfrac:.3g} > {config.boundary_tol:g} at t={t:g}")
        if n + 1 in keep:
            times.append(float(t))
            fields.append(snap)
    meta = {"substeps_total": int(np.sum(substeps)),
            "substeps_max": int(np.max(substeps)) if substeps else 0}
    return Trajectory(times, fields, meta)


# --------------------------------------------------------------------------
# weak-form residual
# --------------------------------------------------------------------------


def bump_test_function(center, radius):
    """phi(xi) = (1 - r^2)^4 on |r| < 1, r = (xi - c)/radius, with phi''."""

    def phi(xi):
        r = (np.asarray(xi, dtype=float) - center) / radius
        return np.where(np.abs(r) < 1, (1 - r * r) ** 4, 0.0)

    def phi2(xi):
        r = (np.asarray(xi, dtype=float) - center) / radius
        q = 1 - r * r
        # d^2/dr^2 (1-r^2)^4 = -8 q^3 + 48 r^2 q^2
        return np.where(np.abs(r) < 1, (-8 * q**3 + 48 * r * r * q * q) / radius**2, 0.0)

    return phi, phi2


def weak_residual(traj, spec, kappa, model, real, phi, phi2):
    """Residual of the weak form at the final time, built from per-step snapshots.

    <X_T, phi> - <X_0, phi> - 1/2 sum_n dt <psi(X_n), phi''>
        - sum_n sum_i <X_n e_i, phi> dW^i_n      (i = 0 uses dt)
    """
    if len(traj.fields) != real.n_steps + 1:
        raise ValueError("weak_residual needs a trajectory stored at every step")
    grid = traj.fields[0].grid
    xi, dxi = grid.nodes, grid.dxi
    p, p2 = phi(xi), phi2(xi)
    e0p = model.drift(xi) * p
    eps = [c(xi) * p for c in model.drivers]
    acc = 0.0
    for n in range(real.n_steps):
        X = traj.fields[n].values
        dt = real.time_grid[n + 1] - real.time_grid[n]
        acc += 0.5 * dt * dxi * np.dot(psi_kappa_eval(spec, kappa, X), p2)
        acc += dt * dxi * np.dot(X, e0p)
        for i, ep in enumerate(eps):
            acc += real.increments[n, i] * dxi * np.dot(X, ep)
    lhs = dxi * np.dot(traj.fields[-1].values - traj.fields[0].values, p)
    return float(lhs - acc)
