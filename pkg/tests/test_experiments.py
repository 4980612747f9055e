import os

import numpy as np
import pytest

from dsnld.config import load_config, parse_config
from dsnld.experiments import (
    richardson, run_filter_demo, run_fp_uniqueness, run_kappa_sweep, run_representation_check,
)
from dsnld.grid import DensityField, GridSpec, l1_distance
from dsnld.oracles import barenblatt, gaussian_density, heat_convolution

SEEDS = {"env": 1, "particles": 2, "initial": 3}


def cfg(**kw):
    base = {"seeds": SEEDS, "time": {"T": 1.0, "dt": 0.01}}
    base.update(kw)
    return parse_config(base)


def test_kappa_sweep_linear_slope_near_one():
    c = cfg(experiment="kappa-sweep", realizations=2, kappa_list=[0.2, 0.1, 0.05, 0.025, 0.0],
            grid={"half_width": 10.0, "n_points": 256},
            noise={"drivers": [{"kind": "gaussian_bump", "amplitude": 0.5}]})
    report, _ = run_kappa_sweep(c)
    slope = next(m.value for m in report.metrics if m.name == "loglog_slope_a_vs_kappa")
    # X^kappa - X solves a heat equation forced by kappa X'' / 2, so |.|^2 ~ kappa^2
    assert 1.5 < slope < 2.5
    ref = report.data["distance_quantities"]
    assert all(ref[k]["mean"][-1] == 0.0 for k in ref)
    assert report.passed


def test_fp_constant_half_matches_heat():
    c = cfg(experiment="fp-uniqueness", grid={"half_width": 10.0, "n_points": 256},
            fp={"coefficients": [{"kind": "constant", "value": 0.5}]})
    report, snaps = run_fp_uniqueness(c)
    assert report.passed
    ext = snaps[0][3]
    g = ext.grid
    heat = heat_convolution(DensityField(g, gaussian_density(g.nodes)), 1.0)
    assert l1_distance(ext, heat) < 1e-3
    for d in report.data["constant0"]["l1_vs_extrapolated"].values():
        assert d < 1e-3


def test_fp_zero_coefficient_is_bitwise_identical():
    c = cfg(experiment="fp-uniqueness", grid={"half_width": 10.0, "n_points": 256},
            noise={"drivers": [{"kind": "gaussian_bump", "amplitude": 0.5}]},
            fp={"coefficients": [{"kind": "constant", "value": 0.0}]})
    report, _ = run_fp_uniqueness(c)
    assert report.data["constant0"]["bitwise_identical"]
    assert report.passed


def test_richardson_recovers_first_order_limit():
    g = GridSpec(1.0, 64)
    limit = np.linspace(0, 1, 64)
    bump = np.sin(np.linspace(0, np.pi, 64))
    fields = [DensityField(g, limit + h * bump) for h in (0.04, 0.02, 0.01)]
    ext, order = richardson(*fields)
    assert order == pytest.approx(1.0)
    assert np.allclose(ext.values, limit)


def test_filter_uninformative_posterior_is_prior():
    c = cfg(experiment="filter-demo", grid={"half_width": 10.0, "n_points": 256},
            particles={"count": 50_000},
            filter={"observations": [{"kind": "zero"}], "oracle_samples": 0})
    report, _ = run_filter_demo(c)
    assert report.passed
    row = report.data["per_snapshot"][-1]
    assert row["grid_var"] == pytest.approx(row["prior_var"], rel=1e-12)
    assert [m.name for m in report.metrics] == ["normalized_l1_grid_vs_particles"]


def test_representation_deterministic_barenblatt():
    c = cfg(experiment="representation", realizations=1, kappa=1e-3,
            grid={"half_width": 6.0, "n_points": 1024},
            nonlinearity={"kind": "power_law", "m": 2.0},
            initial={"kind": "barenblatt", "m": 2.0, "t_init": 1.0},
            particles={"count": 50_000})
    report, snaps = run_representation_check(c)
    assert report.passed
    part = [f for _, _, tag, f in snaps if tag == "particles"][-1]
    g = part.grid
    assert l1_distance(part, DensityField(g, barenblatt(2.0, 2.0, g.nodes))) <= 0.08


@pytest.mark.slow
def test_representation_particle_doubling(config_dir):
    path = os.path.join(config_dir, "representation.toml")
    small = load_config(path, ["realizations=4", "particles.count=50000"])
    big = load_config(path, ["realizations=4", "particles.count=100000"])
    d1 = run_representation_check(small)[0].metrics[0].value
    d2 = run_representation_check(big)[0].metrics[0].value
    assert d2 <= 1.1 * d1


def test_degenerate_without_kappa_is_refused():
    from dsnld.spde import ConfigError

    c = cfg(experiment="representation", realizations=1, kappa=0.0,
            nonlinearity={"kind": "stefan", "u_c": 0.5})
    with pytest.raises(ConfigError):
        run_representation_check(c)
