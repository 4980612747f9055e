"""Periodic spatial grid, spectral Sobolev norms, weighted KDE and field metrics.

FFT layout: nodes xi_j = -L + j*dxi, j = 0..n-1, with numpy's ``fft`` ordering
of wavenumbers k = 2*pi*fftfreq(n, dxi) = pi*j/L. Norms use the Parseval
normalization ``dxi/n * sum |F_k|^2 = dxi * sum |f_j|^2``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    half_width: float
    n_points: int

    def __post_init__(self):
        n = int(self.n_points)
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if n < 64 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 64, got {n}")

    @property
    def dxi(self):
        return 2.0 * self.half_width / self.n_points

    @property
    def nodes(self):
        return -self.half_width + self.dxi * np.arange(self.n_points)

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dxi)

    def refined(self, factor=2):
        return GridSpec(self.half_width, self.n_points * factor)


@dataclass(frozen=True)
class DensityField:
    """Grid values of a density at one time."""

    grid: GridSpec
    values: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"values shape {v.shape} does not match grid of {self.grid.n_points}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mass(self):
        return total_mass(self)

    def scaled(self, c):
        return DensityField(self.grid, c * self.values, self.time_stamp)

    def normalized(self):
        m = self.mass
        if m <= 0:
            raise ZeroDivisionError("cannot normalize a field with non-positive mass")
        return self.scaled(1.0 / m)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "value"])
            for x, v in zip(self.grid.nodes, self.values):
                w.writerow([f"{x:.17g}", f"{v:.17g}"])


def sobolev_norm(values, grid, s):
    """Discrete ||f||_{H^s} = ||(I - Delta)^{s/2} f||_{L^2} on the periodic grid."""
    f = np.asarray(values, dtype=float)
    if f.shape != (grid.n_points,):
        raise ValueError("field length does not match grid")
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite values in field")
    F = np.fft.fft(f)
    k = grid.wavenumbers
    w = (1.0 + k * k) ** s
    return float(np.sqrt(grid.dxi / grid.n_points * np.sum(w * np.abs(F) ** 2)))


def silverman_bandwidth(positions, weights=None):
    """Weighted Silverman rule h = 1.06 * sigma_w * ESS^(-1/5)."""
    y = np.asarray(positions, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    sw = w.sum()
    if sw <= 0:
        raise ZeroDivisionError("weights sum to zero")
    mean = np.dot(w, y) / sw
    var = np.dot(w, (y - mean) ** 2) / sw
    ess = sw * sw / np.dot(w, w)
    return 1.06 * np.sqrt(var) * ess ** (-0.2)


@dataclass
class KDEDiagnostics:
    bandwidth: float
    out_of_domain: int


def weighted_kde(positions, weights, grid, bandwidth, return_diagnostics=False):
    """Gaussian KDE of the weighted empirical measure (1/N) sum_p w_p delta_{Y_p}.

    Particles are deposited on the periodic grid by linear (cloud-in-cell)
    binning, then smoothed by multiplying the spectrum with the Gaussian
    kernel's Fourier transform exp(-k^2 h^2 / 2). Particles outside [-L, L]
    are counted and wrapped periodically.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    y = np.asarray(positions, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("non-finite particle weights")
    n, dxi, L = grid.n_points, grid.dxi, grid.half_width
    outside = int(np.count_nonzero((y < -L) | (y >= L)))
    if outside:
        log.debug("%d particles outside [-L, L] wrapped periodically", outside)
    s = (y + L) / dxi
    j0 = np.floor(s)
    frac = s - j0
    j0 = j0.astype(np.int64) % n
    j1 = (j0 + 1) % n
    hist = np.bincount(j0, weights=w * (1.0 - frac), minlength=n)
    hist += np.bincount(j1, weights=w * frac, minlength=n)
    hist /= len(y) * dxi
    k = grid.wavenumbers
    smooth = np.fft.ifft(np.fft.fft(hist) * np.exp(-0.5 * (k * bandwidth) ** 2)).real
    np.maximum(smooth, 0.0, out=smooth)
    field = DensityField(grid, smooth)
    if return_diagnostics:
        return field, KDEDiagnostics(float(bandwidth), outside)
    return field


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def l1_distance(a, b):
    _same_grid(a, b)
    return float(a.grid.dxi * np.sum(np.abs(a.values - b.values)))


def total_mass(field):
    return float(field.grid.dxi * np.sum(field.values))


def boundary_mass_fraction(field, frac=0.05):
    """Share of |mass| sitting in the outer ``frac`` of the domain on each side."""
    v = np.abs(field.values)
    edge = max(1, int(frac * field.grid.n_points))
    tot = v.sum()
    if tot == 0:
        return 0.0
    return float((v[:edge].sum() + v[-edge:].sum()) / tot)


def restrict(field, coarse):
    """Sample a field from a finer nested grid onto ``coarse``."""
    fine = field.grid
    if fine.half_width != coarse.half_width or fine.n_points % coarse.n_points:
        raise GridMismatchError("grids are not nested")
    step = fine.n_points // coarse.n_points
    return DensityField(coarse, field.values[::step], field.time_stamp)


def sample_function(f, grid, t=0.0):
    return DensityField(grid, f(grid.nodes), t)
