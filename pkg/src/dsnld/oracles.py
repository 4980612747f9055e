"""Closed-form reference solutions."""

from __future__ import annotations

import numpy as np
from scipy.special import beta as beta_fn

from .grid import DensityField


def gaussian_density(xi, mean=0.0, var=1.0):
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.5 * (xi - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def _barenblatt_constants(m):
    if m <= 1:
        raise ValueError("barenblatt needs m > 1")
    alpha = 1.0 / (m + 1.0)
    k = (m - 1.0) * alpha / (2.0 * m)
    p = 1.0 / (m - 1.0)
    # mass of (C - k x^2)_+^p is C^(p + 1/2) k^(-1/2) B(1/2, p + 1)
    C = (np.sqrt(k) / beta_fn(0.5, p + 1.0)) ** (1.0 / (p + 0.5))
    return alpha, k, p, C


def barenblatt(m, t, xi):
    """Unit-mass Barenblatt solution of du/dt = 1/2 d^2(u^m)/dxi^2.

    Textbook profile for du/dt = d^2(u^m) evaluated at s = t/2.
    """
    if np.any(np.asarray(t) <= 0):
        raise ValueError("barenblatt is defined for t > 0")
    alpha, k, p, C = _barenblatt_constants(m)
    s = 0.5 * np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=float)
    core = np.maximum(C - k * xi * xi * s ** (-2.0 * alpha), 0.0)
    return s ** (-alpha) * core**p


def barenblatt_support(m, t):
    """Half-width of the support of barenblatt(m, t, .)."""
    alpha, k, _, C = _barenblatt_constants(m)
    return float(np.sqrt(C / k) * (0.5 * t) ** alpha)


def barenblatt_max(m, t):
    return float(barenblatt(m, t, 0.0))


def heat_convolution(x0, t, grid=None):
    """Apply the semigroup of (1/2) d^2/dxi^2 for time t, spectrally."""
    if t < 0:
        raise ValueError("t must be >= 0")
    grid = x0.grid if grid is None else grid
    if t == 0:
        return DensityField(grid, x0.values, x0.time_stamp)
    k = grid.wavenumbers
    v = np.fft.ifft(np.fft.fft(x0.values) * np.exp(-0.5 * t * k * k)).real
    return DensityField(grid, v, x0.time_stamp + t)


def linear_noise_factor(constants, real, t):
    """exp(sum_{i>=1} c_i W^i_t - 1/2 sum c_i^2 t + c_0 t); W read off the grid."""
    c0, cs = float(constants[0]), np.asarray(constants[1:], dtype=float)
    W = real.W_at(t)
    if len(cs) != len(W):
        raise ValueError(f"{len(cs)} driver constants for {len(W)} drivers")
    return float(np.exp(np.dot(cs, W) - 0.5 * np.dot(cs, cs) * t + c0 * t))


def linear_exact(x0, constants, real, t, grid=None):
    """Solution of the linear equation with spatially constant noise coefficients."""
    factor = linear_noise_factor(constants, real, t)
    heat = heat_convolution(x0, t, grid)
    return DensityField(heat.grid, factor * heat.values, t)
