import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsnld.nonlinearity import (
    NonlinearitySpec, phi_eval, phi_kappa_eval, psi_eval, psi_kappa_eval, validate_spec,
)

BUILTIN = [NonlinearitySpec.linear(), NonlinearitySpec.power_law(2.0, 2.0),
           NonlinearitySpec.power_law(3.0, 1.5), NonlinearitySpec.stefan(0.5),
           NonlinearitySpec.stefan(0.2, 2.0, 3.0)]


def test_psi_examples():
    assert psi_eval(NonlinearitySpec.linear(), 0.7) == pytest.approx(0.7)
    assert psi_eval(NonlinearitySpec.power_law(2, 2), 0.5) == pytest.approx(0.25)
    assert psi_eval(NonlinearitySpec.stefan(0.5), 0.3) == 0.0


def test_power_law_linear_continuation():
    spec = NonlinearitySpec.power_law(2.0, 2.0)
    # slope m u_max^(m-1) = 4 beyond u_max = 2, starting from psi(2) = 4
    assert psi_eval(spec, 3.0) == pytest.approx(4.0 + 4.0)
    assert spec.lipschitz_L == pytest.approx(4.0)


@pytest.mark.parametrize("spec", BUILTIN)
def test_odd_and_even_extensions(spec):
    u = np.linspace(0, 2, 41)
    assert np.allclose(psi_eval(spec, -u), -psi_eval(spec, u))
    assert np.allclose(phi_eval(spec, -u), phi_eval(spec, u))
    assert psi_eval(spec, 0.0) == 0.0


def test_phi_examples():
    assert np.all(phi_eval(NonlinearitySpec.linear(), np.array([-2.0, 0.0, 5.0])) == 1.0)
    assert phi_eval(NonlinearitySpec.power_law(2, 2), 0.25) == pytest.approx(0.5)
    assert phi_eval(NonlinearitySpec.stefan(0.5), 0.3) == 0.0


def test_phi_kappa_examples():
    spec = NonlinearitySpec.power_law(2, 2)
    u = np.linspace(0, 1.5, 7)
    assert np.array_equal(phi_kappa_eval(spec, 0.0, u), phi_eval(spec, u))
    assert phi_kappa_eval(NonlinearitySpec.stefan(0.5), 0.04, 0.3) == pytest.approx(0.2)
    assert phi_kappa_eval(NonlinearitySpec.linear(), 1.0, 3.3) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        phi_kappa_eval(spec, -0.1, 0.5)


@pytest.mark.parametrize("spec", BUILTIN)
def test_builtin_specs_validate(spec):
    report = validate_spec(spec, 1000)
    assert report.passed, report.failures()


def test_validate_flags_decreasing_table():
    spec = NonlinearitySpec.table([0.0, 0.5, 1.0, 1.5], [0.0, 0.5, 0.3, 0.6])
    report = validate_spec(spec, 200)
    assert not report.passed
    names = report.failures()
    assert any("monoton" in n for n in names)


def test_validate_needs_samples():
    with pytest.raises(ValueError):
        validate_spec(NonlinearitySpec.linear(), 50)


@pytest.mark.parametrize("spec", BUILTIN)
def test_phi_squared_consistency(spec):
    rng = np.random.default_rng(0)
    u = rng.uniform(0, spec.u_max or 2.0, 1000)
    u = u[u > 0]
    psi = psi_eval(spec, u)
    assert np.all(np.abs(phi_eval(spec, u) ** 2 * u - psi) <= 1e-12 * (1 + np.abs(psi)))


@pytest.mark.parametrize("spec", BUILTIN)
def test_small_u_limit(spec):
    r = psi_eval(spec, np.array([1e-3, 1e-4, 1e-5, 1e-6])) / np.array([1e-3, 1e-4, 1e-5, 1e-6])
    assert r.max() - r.min() < 1e-3 * spec.lipschitz_L


def test_degeneracy_properties():
    assert NonlinearitySpec.stefan(0.5).is_degenerate
    assert NonlinearitySpec.stefan(0.5).degeneracy_threshold == 0.5
    assert not NonlinearitySpec.linear().is_degenerate
    assert NonlinearitySpec.power_law(2, 1).alpha == pytest.approx(1 / 2)


@pytest.mark.parametrize("spec", BUILTIN)
def test_params_round_trip(spec):
    again = NonlinearitySpec.from_params(spec.to_params())
    u = np.linspace(0, 3, 31)
    assert np.array_equal(psi_eval(spec, u), psi_eval(again, u))


def test_table_from_csv(tmp_path):
    path = tmp_path / "psi.csv"
    path.write_text("u,psi\n0,0\n1,1\n2,4\n")
    spec = NonlinearitySpec.table_from_csv(path)
    assert psi_eval(spec, 1.5) == pytest.approx(2.5)


spec_st = st.sampled_from(BUILTIN)
u_st = st.floats(0.0, 4.0, allow_nan=False)
kappa_st = st.floats(0.0, 2.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(spec_st, u_st, kappa_st, kappa_st)
def test_regularized_ordering(spec, u, k1, k2):
    lo, hi = sorted((k1, k2))
    assert phi_kappa_eval(spec, hi, u) >= phi_kappa_eval(spec, lo, u)
    assert phi_kappa_eval(spec, hi, u) >= np.sqrt(hi) - 1e-15


@settings(max_examples=200, deadline=None)
@given(spec_st, u_st, u_st, kappa_st)
def test_lipschitz_ladder(spec, u, v, kappa):
    L = spec.lipschitz_L
    lhs = abs(psi_kappa_eval(spec, kappa, u) - psi_kappa_eval(spec, kappa, v))
    assert lhs <= (L + kappa) * abs(u - v) * (1 + 1e-12) + 1e-14


@settings(max_examples=200, deadline=None)
@given(spec_st, u_st)
def test_linear_growth_and_phi_bound(spec, u):
    assert abs(psi_eval(spec, u)) <= spec.lipschitz_L * u * (1 + 1e-12) + 1e-15
    assert phi_eval(spec, u) <= np.sqrt(spec.lipschitz_L) * (1 + 1e-12)
