"""Colored noise environment mu(t, xi) = sum_i e_i(xi) W^i_t + e_0(xi) t.

Coefficient families carry analytic sup norms of the function and of its
first two derivatives. ``NoiseModel.coeffs[0]`` is the drift coefficient
(paired with W^0_t = t); ``coeffs[1:]`` multiply the Brownian drivers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import GENERATOR_ID, CounterStream


class InvalidGridError(ValueError):
    pass


# --------------------------------------------------------------------------
# coefficient families
# --------------------------------------------------------------------------


class Coefficient:
    """A bounded C^2 function on the real line with known sup norms."""

    kind = "abstract"
    in_h1 = True

    def __call__(self, xi):
        raise NotImplementedError

    def d1(self, xi):
        raise NotImplementedError

    def d2(self, xi):
        raise NotImplementedError

    @property
    def sup_norms(self):
        """(sup|e|, sup|e'|, sup|e''|)."""
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def is_zero(self):
        return self.sup_norms[0] == 0.0

    def is_constant(self):
        return self.sup_norms[1] == 0.0


@dataclass(frozen=True)
class Constant(Coefficient):
    value: float = 0.0
    kind = "constant"

    @property
    def in_h1(self):
        return self.value == 0.0

    def __call__(self, xi):
        return np.full(np.shape(xi), float(self.value))

    def d1(self, xi):
        return np.zeros(np.shape(xi))

    def d2(self, xi):
        return np.zeros(np.shape(xi))

    @property
    def sup_norms(self):
        return (abs(self.value), 0.0, 0.0)

    def params(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class GaussianBump(Coefficient):
    """a * exp(-(xi - m)^2 / (2 s^2))."""

    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    kind = "gaussian_bump"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("gaussian_bump width must be positive")

    def __call__(self, xi):
        z = (np.asarray(xi, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * z * z)

    def d1(self, xi):
        z = (np.asarray(xi, dtype=float) - self.center) / self.width
        return -self.amplitude * z / self.width * np.exp(-0.5 * z * z)

    def d2(self, xi):
        z = (np.asarray(xi, dtype=float) - self.center) / self.width
        return self.amplitude * (z * z - 1.0) / self.width**2 * np.exp(-0.5 * z * z)

    @property
    def sup_norms(self):
        a, s = abs(self.amplitude), self.width
        # |z e^{-z^2/2}| peaks at z=1; |(z^2-1) e^{-z^2/2}| peaks at z=0
        return (a, a * np.exp(-0.5) / s, a / s**2)

    def params(self):
        return {"kind": "gaussian_bump", "amplitude": self.amplitude,
                "center": self.center, "width": self.width}


@dataclass(frozen=True)
class ScaledSine(Coefficient):
    """a * sin(f * xi + phase)."""

    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    kind = "sine"
    in_h1 = False

    def __call__(self, xi):
        return self.amplitude * np.sin(self.frequency * np.asarray(xi, dtype=float) + self.phase)

    def d1(self, xi):
        return self.amplitude * self.frequency * np.cos(
            self.frequency * np.asarray(xi, dtype=float) + self.phase)

    def d2(self, xi):
        return -self.amplitude * self.frequency**2 * np.sin(
            self.frequency * np.asarray(xi, dtype=float) + self.phase)

    @property
    def sup_norms(self):
        a, f = abs(self.amplitude), abs(self.frequency)
        return (a, a * f, a * f * f)

    def params(self):
        return {"kind": "sine", "amplitude": self.amplitude,
                "frequency": self.frequency, "phase": self.phase}


@dataclass(frozen=True)
class Sigmoid(Coefficient):
    """a * tanh((xi - m) / w), a smooth bounded step."""

    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    kind = "sigmoid"
    in_h1 = False

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("sigmoid width must be positive")

    def __call__(self, xi):
        return self.amplitude * np.tanh((np.asarray(xi, dtype=float) - self.center) / self.width)

    def d1(self, xi):
        t = np.tanh((np.asarray(xi, dtype=float) - self.center) / self.width)
        return self.amplitude / self.width * (1.0 - t * t)

    def d2(self, xi):
        t = np.tanh((np.asarray(xi, dtype=float) - self.center) / self.width)
        return -2.0 * self.amplitude / self.width**2 * t * (1.0 - t * t)

    @property
    def sup_norms(self):
        a, w = abs(self.amplitude), self.width
        # max |t(1-t^2)| on [-1,1] is 2/(3 sqrt 3)
        return (a, a / w, 4.0 * a / (3.0 * np.sqrt(3.0) * w * w))

    def params(self):
        return {"kind": "sigmoid", "amplitude": self.amplitude,
                "center": self.center, "width": self.width}


_FAMILIES = {
    "constant": Constant,
    "zero": lambda: Constant(0.0),
    "gaussian_bump": GaussianBump,
    "sine": ScaledSine,
    "sigmoid": Sigmoid,
}


def coefficient_from_params(params):
    params = dict(params)
    kind = params.pop("kind")
    try:
        factory = _FAMILIES[kind]
    except KeyError:
        raise ValueError(f"unknown coefficient kind {kind!r}") from None
    return factory(**params)


# --------------------------------------------------------------------------
# model and realization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Coefficients e^0..e^N; index 0 is the drift."""

    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("NoiseModel needs at least the drift coefficient e^0")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @classmethod
    def build(cls, drift=None, drivers=()):
        drift = Constant(0.0) if drift is None else drift
        return cls((drift, *drivers))

    @property
    def n_drivers(self):
        return len(self.coeffs) - 1

    @property
    def drift(self):
        return self.coeffs[0]

    @property
    def drivers(self):
        return self.coeffs[1:]

    @property
    def sup_norms(self):
        return [c.sup_norms for c in self.coeffs]

    def is_trivial(self):
        return all(c.is_zero() for c in self.coeffs)

    def h1_violations(self):
        """Indices of coefficients that are not in H^1(R)."""
        return [i for i, c in enumerate(self.coeffs) if not c.in_h1]

    def check_sup_norms(self, half_width, n=20001, rtol=1e-3):
        """Compare stored sup norms against dense sampling on [-L, L].

        Returns a list of (index, which, stored, sampled) for every sampled
        value that exceeds the stored bound.
        """
        xi = np.linspace(-half_width, half_width, n)
        bad = []
        for i, c in enumerate(self.coeffs):
            for which, f, bound in zip(("e", "e'", "e''"), (c, c.d1, c.d2), c.sup_norms):
                sampled = float(np.max(np.abs(f(xi))))
                if sampled > bound * (1 + rtol) + 1e-14:
                    bad.append((i, which, bound, sampled))
        return bad

    def to_params(self):
        return {"drift": self.drift.params(), "drivers": [c.params() for c in self.drivers]}

    @classmethod
    def from_params(cls, params):
        drift = coefficient_from_params(params.get("drift", {"kind": "zero"}))
        drivers = [coefficient_from_params(p) for p in params.get("drivers", [])]
        return cls.build(drift, drivers)


@dataclass(frozen=True)
class NoiseRealization:
    """One sampled environment path (a quenched omega)."""

    time_grid: np.ndarray
    increments: np.ndarray  # shape (M, N)
    seed: int
    generator_id: str = GENERATOR_ID
    _path: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        tg = _validate_grid(self.time_grid)
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 2 or inc.shape[0] != len(tg) - 1:
            raise ValueError(
                f"increments shape {inc.shape} does not match {len(tg) - 1} steps")
        tg.setflags(write=False)
        inc.setflags(write=False)
        path = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
        path.setflags(write=False)
        object.__setattr__(self, "time_grid", tg)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "_path", path)

    @property
    def n_steps(self):
        return len(self.time_grid) - 1

    @property
    def n_drivers(self):
        return self.increments.shape[1]

    @property
    def dt(self):
        return np.diff(self.time_grid)

    @property
    def path(self):
        """Cumulative W^i at every grid instant, shape (M+1, N)."""
        return self._path

    def index_of(self, t, tol=1e-12):
        """Grid index of time t; refuses anything off the grid."""
        j = int(np.argmin(np.abs(self.time_grid - t)))
        if abs(self.time_grid[j] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the realization's time grid")
        return j

    def W_at(self, t):
        return self._path[self.index_of(t)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"W{i}" for i in range(1, self.n_drivers + 1)])
            for t, row in zip(self.time_grid, self._path):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def _validate_grid(time_grid):
    tg = np.array(time_grid, dtype=float)
    if tg.ndim != 1 or len(tg) < 2:
        raise InvalidGridError("time grid needs at least two instants")
    if tg[0] != 0.0:
        raise InvalidGridError("time grid must start at 0")
    if not np.all(np.isfinite(tg)) or np.any(np.diff(tg) <= 0):
        raise InvalidGridError("time grid must be finite and strictly increasing")
    return tg


def uniform_time_grid(T, dt):
    m = int(round(T / dt))
    if m < 1 or abs(m * dt - T) > 1e-9 * max(1.0, T):
        raise InvalidGridError(f"T={T} is not a whole number of steps dt={dt}")
    return np.linspace(0.0, T, m + 1)


def sample_noise(model, time_grid, seed, stream="environment", block=0):
    """Draw the Brownian increments of all N drivers on a time grid.

    ``block`` selects an independent substream of the same seed; experiments
    use it as the omega-realization index.
    """
    tg = _validate_grid(time_grid)
    m, n = len(tg) - 1, model.n_drivers
    if n == 0:
        inc = np.zeros((m, 0))
    else:
        z = CounterStream(seed, stream).normals(block, (m, n))
        inc = z * np.sqrt(np.diff(tg))[:, None]
    return NoiseRealization(tg, inc, int(seed))


def _check_step(real, n):
    if not 0 <= n < real.n_steps:
        raise IndexError(f"step index {n} outside [0, {real.n_steps})")


def mu_increment(model, real, n, xi):
    """sum_{i>=1} e_i(xi) dW^i_n + e_0(xi) dt_n."""
    _check_step(real, n)
    xi = np.asarray(xi, dtype=float)
    dt = real.time_grid[n + 1] - real.time_grid[n]
    out = model.drift(xi) * dt
    for i, c in enumerate(model.drivers):
        out = out + c(xi) * real.increments[n, i]
    return out


def log_doleans_increment(model, real, n, y, include_drift=True):
    """Log-weight increment of the Doleans exponential over step n.

    Evaluated at the pre-move position ``y`` (left point). With
    ``include_drift=False`` the e^0 term is left out, which gives the
    increment of the pure martingale part.
    """
    _check_step(real, n)
    y = np.asarray(y, dtype=float)
    dt = real.time_grid[n + 1] - real.time_grid[n]
    out = np.zeros(y.shape)
    for i, c in enumerate(model.drivers):
        if c.is_zero():
            continue
        e = c(y)
        out = out + e * real.increments[n, i] - 0.5 * e * e * dt
    if include_drift and not model.drift.is_zero():
        out = out + model.drift(y) * dt
    return out


def multiplier_constant(e):
    """C(e) = sqrt(2) * sqrt(|e|_inf^2 + |e'|_inf^2); bounds |e g|_{H^1} / |g|_{H^1}."""
    s0, s1, _ = e.sup_norms
    return float(np.sqrt(2.0) * np.hypot(s0, s1))
