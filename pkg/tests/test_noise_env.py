import numpy as np
import pytest

from dsnld.noise_env import (
    Constant, GaussianBump, InvalidGridError, NoiseModel, NoiseRealization, ScaledSine, Sigmoid,
    log_doleans_increment, mu_increment, multiplier_constant, sample_noise, uniform_time_grid,
)


def test_no_drivers_gives_empty_increments():
    real = sample_noise(NoiseModel.build(), uniform_time_grid(1.0, 0.1), seed=1)
    assert real.increments.shape == (10, 0)


def test_increment_variance_chi_square():
    model = NoiseModel.build(drivers=[Constant(1.0)])
    real = sample_noise(model, uniform_time_grid(1000.0, 0.01), seed=3)
    inc = real.increments[:, 0]
    assert inc.shape == (100_000,)
    # var of the sample variance for Gaussian data: 2 sigma^4 / (n - 1)
    se = np.sqrt(2 * 0.01**2 / (len(inc) - 1))
    assert abs(inc.var(ddof=1) - 0.01) < 3 * se


def test_sampling_is_deterministic_and_seed_dependent():
    model = NoiseModel.build(drivers=[Constant(1.0), Constant(0.5)])
    tg = uniform_time_grid(1.0, 0.01)
    a, b = sample_noise(model, tg, 42), sample_noise(model, tg, 42)
    assert np.array_equal(a.increments, b.increments)
    assert a.increments.shape == (100, 2)
    assert not np.array_equal(a.increments, sample_noise(model, tg, 43).increments)
    assert not np.array_equal(a.increments, sample_noise(model, tg, 42, block=1).increments)


@pytest.mark.parametrize("grid", [[], [0.0], [0.0, 0.5, 0.4], [0.1, 0.2]])
def test_invalid_grids(grid):
    with pytest.raises(InvalidGridError):
        sample_noise(NoiseModel.build(drivers=[Constant(1.0)]), np.array(grid), 0)


def test_realization_is_read_only():
    real = sample_noise(NoiseModel.build(drivers=[Constant(1.0)]), uniform_time_grid(1, 0.1), 0)
    with pytest.raises(ValueError):
        real.increments[0, 0] = 1.0


def _manual(increments, dt=1.0):
    m = len(increments)
    return NoiseRealization(np.linspace(0, m * dt, m + 1), np.asarray(increments, float), 0)


def test_mu_increment_cases():
    real = _manual([[0.3]], dt=0.5)
    assert mu_increment(NoiseModel.build(), _manual(np.zeros((1, 0)), 0.5), 0, 1.0) == 0.0
    assert mu_increment(NoiseModel.build(drift=Constant(1.0)), _manual(np.zeros((1, 0)), 0.5),
                        0, 2.0) == pytest.approx(0.5)
    model = NoiseModel.build(drivers=[Constant(2.0)])
    assert mu_increment(model, real, 0, 0.0) == pytest.approx(0.6)
    with pytest.raises(IndexError):
        mu_increment(model, real, 1, 0.0)


def test_mu_increments_telescope_to_path():
    c = 0.7
    model = NoiseModel.build(drivers=[Constant(c)])
    real = sample_noise(model, uniform_time_grid(1.0, 0.01), 5)
    total = sum(mu_increment(model, real, n, 0.3) for n in range(real.n_steps))
    assert total == pytest.approx(c * real.W_at(1.0)[0], abs=1e-12)


def test_log_doleans_examples():
    model = NoiseModel.build(drivers=[Constant(1.0)])
    assert log_doleans_increment(model, _manual([[0.3]]), 0, 0.0) == pytest.approx(-0.2)
    zero = NoiseModel.build(drivers=[Constant(0.0)])
    assert log_doleans_increment(zero, _manual([[0.3]]), 0, 0.0) == 0.0
    drift = NoiseModel.build(drift=Constant(1.0))
    real = sample_noise(drift, uniform_time_grid(2.0, 0.1), 0)
    total = sum(log_doleans_increment(drift, real, n, 0.0) for n in range(real.n_steps))
    assert total == pytest.approx(2.0, rel=1e-12)


def test_log_doleans_constant_coefficient_is_exact():
    c = 0.8
    model = NoiseModel.build(drivers=[Constant(c)])
    real = sample_noise(model, uniform_time_grid(1.0, 0.01), 9)
    y = np.array([-3.0, 0.0, 2.5])
    total = sum(log_doleans_increment(model, real, n, y) for n in range(real.n_steps))
    expected = c * real.W_at(1.0)[0] - 0.5 * c * c * 1.0
    assert np.allclose(total, expected, rtol=0, atol=1e-12)


def test_index_of_refuses_off_grid_times():
    real = sample_noise(NoiseModel.build(drivers=[Constant(1)]), uniform_time_grid(1, 0.1), 0)
    assert real.index_of(0.5) == 5
    with pytest.raises(ValueError):
        real.W_at(0.55)


def test_multiplier_constant_examples():
    assert multiplier_constant(Constant(0.0)) == 0.0
    assert multiplier_constant(Constant(1.0)) == pytest.approx(np.sqrt(2))
    assert multiplier_constant(ScaledSine(1.0)) == pytest.approx(2.0)


@pytest.mark.parametrize("coef", [GaussianBump(0.7, 0.3, 0.8), ScaledSine(1.3, 2.0, 0.4),
                                  Sigmoid(2.0, -0.5, 0.5), Constant(-0.4)])
def test_analytic_sup_norms_match_dense_sampling(coef):
    xi = np.linspace(-30, 30, 400_001)
    dense = (np.abs(coef(xi)).max(), np.abs(coef.d1(xi)).max(), np.abs(coef.d2(xi)).max())
    assert np.allclose(coef.sup_norms, dense, rtol=1e-4, atol=1e-12)


def test_h1_flag_on_constants():
    # a zero constant is in H^1, a nonzero one is not
    model = NoiseModel.build(drift=Constant(0.0), drivers=[Constant(1.0), GaussianBump(1.0)])
    assert model.h1_violations() == [1]


def test_model_params_round_trip():
    model = NoiseModel.build(drift=Constant(0.2), drivers=[GaussianBump(0.5, 1.0, 2.0),
                                                           Sigmoid(3.0, 0.0, 0.5)])
    again = NoiseModel.from_params(model.to_params())
    xi = np.linspace(-5, 5, 11)
    for a, b in zip(model.coeffs, again.coeffs):
        assert np.array_equal(a(xi), b(xi))


def test_csv_dump(tmp_path):
    model = NoiseModel.build(drivers=[Constant(1.0), Constant(1.0)])
    real = sample_noise(model, uniform_time_grid(1, 0.25), 0)
    path = tmp_path / "w.csv"
    real.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,W1,W2"
    assert len(rows) == 6
    last = np.array(rows[-1].split(","), dtype=float)
    assert np.array_equal(last[1:], real.path[-1])


def test_martingale_moment_of_constant_driver():
    c = 1.0
    model = NoiseModel.build(drivers=[Constant(c)])
    tg = np.array([0.0, 1.0])
    z = np.array([sample_noise(model, tg, 11, block=r).increments[0, 0] for r in range(10_000)])
    m = np.exp(c * z - 0.5 * c * c)
    assert abs(m.mean() - 1) < 4 * m.std(ddof=1) / np.sqrt(len(m))
    assert (m * m).mean() <= np.exp(3.0)
