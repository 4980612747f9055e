"""Doubly stochastic particle representation of the stochastic porous media equation."""

from .grid import DensityField, GridSpec, l1_distance, sobolev_norm, total_mass, weighted_kde
from .noise_env import NoiseModel, NoiseRealization, sample_noise
from .nonlinearity import NonlinearitySpec, phi_eval, phi_kappa_eval, psi_eval
from .particles import InitialLaw, ParticleConfig, ParticleEnsemble, evolve_mckean
from .spde import SolverConfig, solve_fokker_planck, solve_spde

__version__ = "0.1.0"

__all__ = [
    "DensityField", "GridSpec", "l1_distance", "sobolev_norm", "total_mass", "weighted_kde",
    "NoiseModel", "NoiseRealization", "sample_noise",
    "NonlinearitySpec", "phi_eval", "phi_kappa_eval", "psi_eval",
    "InitialLaw", "ParticleConfig", "ParticleEnsemble", "evolve_mckean",
    "SolverConfig", "solve_fokker_planck", "solve_spde",
]
