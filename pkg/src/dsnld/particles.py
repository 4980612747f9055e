"""Weighted particle system for the doubly stochastic nonlinear diffusion.

Each particle carries a position Y^p, driven by its own Brownian motion with
diffusivity Phi_kappa(X(t, Y^p)), and a log Doleans weight accumulating the
environment integral along its path. The weighted empirical law, smoothed by
a KDE, is the particle estimate of X(t, ., omega).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtri

from . import oracles
from .grid import DensityField, silverman_bandwidth, weighted_kde
from .noise_env import log_doleans_increment
from .nonlinearity import phi_kappa_eval
from .rng import CounterStream

log = logging.getLogger(__name__)


class ESSCollapseError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ParticleEnsemble:
    positions: np.ndarray
    log_weights: np.ndarray
    particle_seed: int = 0
    time_stamp: float = 0.0

    def __post_init__(self):
        y = np.array(self.positions, dtype=float)
        lw = np.array(self.log_weights, dtype=float)
        if y.ndim != 1 or y.shape != lw.shape or len(y) < 1:
            raise ValueError("positions and log_weights must be equal-length 1-d arrays")
        if not np.all(np.isfinite(lw)):
            raise FloatingPointError("non-finite log-weights")
        y.setflags(write=False)
        lw.setflags(write=False)
        object.__setattr__(self, "positions", y)
        object.__setattr__(self, "log_weights", lw)

    @property
    def n_particles(self):
        return len(self.positions)

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def mean_weight(self):
        return float(np.mean(self.weights))


# --------------------------------------------------------------------------
# initial laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialLaw:
    """x0 as a sampler plus (when known) its density.

    kinds: gaussian(mean, sd), uniform(a, b), barenblatt(m, t_init),
    table(xs, density).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "barenblatt", "table"):
            raise ValueError(f"unknown initial law {self.kind!r}")
        if self.kind == "table":
            xs = np.asarray(self.params["xs"], dtype=float)
            d = np.asarray(self.params["density"], dtype=float)
            if np.any(d < 0) or np.any(np.diff(xs) <= 0) or xs.shape != d.shape:
                raise ValueError("table density needs increasing xs and nonnegative values")
            mass = np.trapezoid(d, xs)
            if abs(mass - 1.0) > 1e-9:
                log.warning("table density has mass %.6g; normalizing", mass)
                d = d / mass
            p = dict(self.params, xs=tuple(xs), density=tuple(d))
            object.__setattr__(self, "params", p)

    @classmethod
    def gaussian(cls, mean=0.0, sd=1.0):
        return cls("gaussian", {"mean": float(mean), "sd": float(sd)})

    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", {"a": float(a), "b": float(b)})

    @classmethod
    def barenblatt(cls, m, t_init=1.0):
        return cls("barenblatt", {"m": float(m), "t_init": float(t_init)})

    @classmethod
    def table(cls, xs, density):
        return cls("table", {"xs": tuple(xs), "density": tuple(density)})

    def to_params(self):
        out = {"kind": self.kind}
        out.update({k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()})
        return out

    @classmethod
    def from_params(cls, params):
        p = dict(params)
        kind = p.pop("kind")
        if kind == "table":
            return cls.table(p["xs"], p["density"])
        return cls(kind, {k: float(v) for k, v in p.items()})

    def density(self, xi):
        xi = np.asarray(xi, dtype=float)
        p = self.params
        if self.kind == "gaussian":
            return oracles.gaussian_density(xi, p["mean"], p["sd"] ** 2)
        if self.kind == "uniform":
            return np.where((xi >= p["a"]) & (xi <= p["b"]), 1.0 / (p["b"] - p["a"]), 0.0)
        if self.kind == "barenblatt":
            return oracles.barenblatt(p["m"], p["t_init"], xi)
        return np.interp(xi, p["xs"], p["density"], left=0.0, right=0.0)

    def max_density(self):
        p = self.params
        if self.kind == "gaussian":
            return 1.0 / (np.sqrt(2 * np.pi) * p["sd"])
        if self.kind == "uniform":
            return 1.0 / (p["b"] - p["a"])
        if self.kind == "barenblatt":
            return oracles.barenblatt_max(p["m"], p["t_init"])
        return float(np.max(p["density"]))

    def _tabulated_cdf(self):
        p = self.params
        if self.kind == "barenblatt":
            r = oracles.barenblatt_support(p["m"], p["t_init"])
            xs = np.linspace(-r, r, 20001)
        else:
            xs = np.asarray(p["xs"])
            xs = np.unique(np.concatenate([xs, np.linspace(xs[0], xs[-1], 20001)]))
        d = self.density(xs)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(xs))])
        return xs, cdf / cdf[-1]

    def quantile(self, u):
        p = self.params
        if self.kind == "gaussian":
            return p["mean"] + p["sd"] * ndtri(u)
        if self.kind == "uniform":
            return p["a"] + (p["b"] - p["a"]) * u
        xs, cdf = self._tabulated_cdf()
        return np.interp(u, cdf, xs)


def sample_initial(x0, n_particles, seed, block=0):
    """I.i.d. positions from x0 by inverse CDF; all weights 1."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    u = CounterStream(seed, "initial").uniforms(block, n_particles)
    y = x0.quantile(u)
    return ParticleEnsemble(y, np.zeros(n_particles), int(seed), 0.0)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def effective_sample_size(ens_or_logw):
    """(sum Z)^2 / sum Z^2, computed in log space."""
    lw = getattr(ens_or_logw, "log_weights", ens_or_logw)
    lw = np.asarray(lw, dtype=float)
    if lw.size == 0 or np.all(np.isneginf(lw)):
        log.warning("all weights are zero; ESS = 0")
        return 0.0
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def ess_from_weights(w):
    w = np.asarray(w, dtype=float)
    s2 = np.dot(w, w)
    if s2 == 0:
        log.warning("all weights are zero; ESS = 0")
        return 0.0
    return float(w.sum() ** 2 / s2)


def kde_field(ens, grid, bandwidth=None):
    w = ens.weights
    h = silverman_bandwidth(ens.positions, w) if bandwidth is None else bandwidth
    f, diag = weighted_kde(ens.positions, w, grid, h, return_diagnostics=True)
    return DensityField(grid, f.values, ens.time_stamp), diag


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------


def quenched_step(ens, diffusivity, dt, model, real, n, normals):
    """One Euler-Maruyama step with left-point weight update.

    1. sigma_p = diffusivity(Y^p) at the pre-move position
    2. log Z^p += Doleans increment at the pre-move position
    3. Y^p += sigma_p sqrt(dt) xi_p
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = ens.positions
    sigma = np.asarray(diffusivity(y), dtype=float)
    bad = ~np.isfinite(sigma)
    if bad.any():
        raise FloatingPointError(f"non-finite diffusivity at xi={y[bad][0]!r}")
    lw = ens.log_weights + log_doleans_increment(model, real, n, y)
    y_new = y + sigma * np.sqrt(dt) * normals
    return ParticleEnsemble(y_new, lw, ens.particle_seed, ens.time_stamp + dt)


@dataclass
class ParticleConfig:
    n_particles: int
    seed_particles: int
    seed_initial: int
    bandwidth: object = "silverman"  # or a positive float
    ess_floor: float = 0.0  # fraction of n_particles
    picard_sweeps: int = 1
    analytic_x0: bool = True

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.picard_sweeps < 1:
            raise ValueError("picard_sweeps must be >= 1")
        if not (self.bandwidth == "silverman" or float(self.bandwidth) > 0):
            raise ValueError("bandwidth must be 'silverman' or a positive number")

    def h(self):
        return None if self.bandwidth == "silverman" else float(self.bandwidth)


@dataclass
class ParticleRun:
    times: list
    fields: list
    ensemble: ParticleEnsemble
    diagnostics: dict

    def at(self, t, tol=1e-9):
        for s, f in zip(self.times, self.fields):
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")

    @property
    def final(self):
        return self.fields[-1]


def _block(omega_index, n):
    return (int(omega_index) << 32) + int(n)


def _run(cfg, coefficient, model, real, x0, grid, snapshot_times, omega_index,
         needs_field, ens=None, track_martingale=False):
    """Shared marching loop.

    ``coefficient(field)`` maps the current density estimate (or None when
    ``needs_field`` is False) to a callable diffusivity. With
    ``track_martingale`` the log of the driver-only exponential martingale
    (no e^0 term) is recorded per particle at the snapshot times.
    """
    if ens is None:
        ens = sample_initial(x0, cfg.n_particles, cfg.seed_initial, block=omega_index)
    stream = CounterStream(cfg.seed_particles, "particles")
    if snapshot_times is None:
        keep = set(range(real.n_steps + 1))
    else:
        keep = {real.index_of(t) for t in snapshot_times}
    L = grid.half_width
    nodes = grid.nodes
    h = cfg.h()
    floor = cfg.ess_floor * cfg.n_particles

    diag = {"times": [], "ess": [], "mass": [], "out_of_domain": [], "bandwidth": []}
    times, fields = [], []
    if track_martingale:
        log_m = np.zeros(ens.n_particles)
        diag["log_martingale"] = {}

    def estimate(e, n):
        if n == 0 and cfg.analytic_x0 and x0 is not None:
            return DensityField(grid, x0.density(nodes), 0.0), None
        return kde_field(e, grid, h)

    for n in range(real.n_steps + 1):
        t = float(real.time_grid[n])
        ess = effective_sample_size(ens)
        want = (needs_field and n < real.n_steps) or n in keep
        fld, kd = estimate(ens, n) if want else (None, None)
        if n in keep:
            times.append(t)
            fields.append(fld)
            if track_martingale:
                diag["log_martingale"][t] = log_m.copy()
        diag["times"].append(t)
        diag["ess"].append(ess)
        diag["mass"].append(ens.mean_weight)
        y = ens.positions
        diag["out_of_domain"].append(int(np.count_nonzero((y < -L) | (y >= L))))
        diag["bandwidth"].append(kd.bandwidth if kd is not None else None)
        if ess < floor:
            report = {"step": n, "t": t, "ess": ess, "floor": floor,
                      "ess_trajectory": list(diag["ess"])}
            raise ESSCollapseError(f"ESS {ess:.1f} fell below floor {floor:.1f} at t={t:g}", report)
        if n == real.n_steps:
            break
        dt = real.time_grid[n + 1] - t
        xi = stream.normals(_block(omega_index, n), ens.n_particles)
        if track_martingale:
            log_m += log_doleans_increment(model, real, n, ens.positions, include_drift=False)
        sigma = coefficient(fld)
        new = quenched_step(ens, sigma, dt, model, real, n, xi)
        for _ in range(cfg.picard_sweeps - 1 if fld is not None else 0):
            ahead, _ = kde_field(new, grid, h)
            mid = DensityField(grid, 0.5 * (fld.values + ahead.values), t)
            new = quenched_step(ens, coefficient(mid), dt, model, real, n, xi)
        ens = new
    return ParticleRun(times, fields, ens, diag)


def evolve_mckean(cfg, spec, kappa, model, real, x0, grid, snapshot_times=None, omega_index=0,
                  track_martingale=False):
    """Self-consistent frozen-coefficient marching.

    At each macro step the diffusivity is Phi_kappa of the current weighted
    KDE, linearly interpolated (periodically) at the particle positions.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    nodes = grid.nodes
    period = 2.0 * grid.half_width
    constant = spec.kind == "linear"

    def coefficient(fld):
        if constant:
            s = float(np.sqrt(1.0 + kappa))
            return lambda y: np.full(np.shape(y), s)
        a = phi_kappa_eval(spec, kappa, fld.values)
        return lambda y: np.interp(y, nodes, a, period=period)

    return _run(cfg, coefficient, model, real, x0, grid, snapshot_times, omega_index,
                needs_field=not constant, track_martingale=track_martingale)


def evolve_fixed(cfg, sigma, model, real, x0, grid, snapshot_times=None, omega_index=0):
    """Weighted particles with a prescribed diffusivity sigma(xi) (linear signal)."""
    return _run(cfg, lambda fld: sigma, model, real, x0, grid, snapshot_times, omega_index,
                needs_field=False)
