import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimm import (
    FluidState,
    ModelParams,
    adversarial_Q,
    dfe_jacobian,
    dfe_spectrum_decomposition,
    generator_from_offdiag,
    integrate,
    match_spectra,
    ngm_ode,
    perron,
    build_A,
    r0_optimal_pi,
    rhs_density,
    rhs_frequency,
    stationary_distribution,
    tau,
    validate_params,
)
from epimm.errors import DimensionMismatch

from oracles import dfe_jacobian_fd

CASE_A = validate_params([1, 2], [0.5, 0.5])
R1 = generator_from_offdiag([[0, 2], [1, 0]])
Q1 = generator_from_offdiag([[0, 1], [2, 0]])
Z1 = [[0.0]]


def _state(x, y):
    return FluidState(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def test_density_disease_free_invariance():
    d = rhs_density(CASE_A, R1, Q1, _state([0.6, 0.4], [0, 0]))
    np.testing.assert_array_equal(d.y, 0.0)
    np.testing.assert_allclose(d.x, R1.rates.T @ [0.6, 0.4])


def test_density_equilibrium_at_stationary_law():
    pi = stationary_distribution(R1).probs
    d = rhs_density(CASE_A, R1, Q1, _state(pi, [0, 0]))
    np.testing.assert_allclose(d.x, 0.0, atol=1e-15)


def test_density_scalar_reduction():
    p = validate_params([2], [1])
    d = rhs_density(p, Z1, Z1, _state([0.7], [0.3]))
    assert d.y[0] == pytest.approx((2 * 0.7 - 1) * 0.3)
    assert d.x[0] == pytest.approx(-d.y[0])


def test_frequency_empty_group_has_no_incidence():
    p = validate_params([1, 2], [0.5, 0.5])
    d = rhs_frequency(p, R1, Q1, _state([0, 0.5], [0, 0.5]))
    assert np.all(np.isfinite(d.x)) and np.all(np.isfinite(d.y))


def test_frequency_scalar_balance():
    d = rhs_frequency(validate_params([2], [1]), Z1, Z1, _state([0.5], [0.5]))
    assert d.y[0] == pytest.approx(0.0, abs=1e-15)


def test_frequency_disease_free():
    d = rhs_frequency(CASE_A, R1, Q1, _state([0.3, 0.7], [0, 0]))
    np.testing.assert_array_equal(d.y, 0.0)


def test_rhs_dimension_check():
    with pytest.raises(DimensionMismatch):
        rhs_density(CASE_A, R1, Q1, _state([1.0], [0.0]))


def test_integrate_linear_equation():
    tr = integrate(lambda s: FluidState(-s.x, -s.y), _state([1.0], [1.0]), 1.0)
    assert tr.y[-1, 0] == pytest.approx(np.exp(-1), abs=1e-7)
    assert tr.t[-1] == 1.0


def test_integrate_relaxes_to_stationary_law():
    rhs = functools.partial(rhs_density, CASE_A, R1, Q1)
    tr = integrate(rhs, _state([1.0, 0.0], [0, 0]), 20.0)
    np.testing.assert_allclose(tr.x[-1], stationary_distribution(R1).probs, atol=1e-7)


@pytest.mark.parametrize("rhs_fn", [rhs_density, rhs_frequency])
def test_integrate_conserves_mass(rhs_fn):
    rhs = functools.partial(rhs_fn, CASE_A, R1, Q1)
    tr = integrate(rhs, _state([0.6, 0.3], [0.05, 0.05]), 50.0)
    total = tr.x.sum(axis=1) + tr.y.sum(axis=1)
    np.testing.assert_allclose(total, 1.0, atol=1e-8)


def test_early_growth_rate_matches_tau():
    pi = stationary_distribution(R1)
    sp = perron(build_A(CASE_A, pi, Q1))
    y0 = 1e-9 * sp.left / sp.left.sum()
    rhs = functools.partial(rhs_density, CASE_A, R1, Q1)
    t_eval = np.linspace(0, 10, 21)
    tr = integrate(rhs, _state(pi.probs, y0), 10.0, t_eval=t_eval, rtol=1e-10)
    slope = np.polyfit(tr.t, np.log(tr.y.sum(axis=1)), 1)[0]
    assert slope == pytest.approx(tau(CASE_A, pi, Q1), rel=0.05)


def test_dfe_scalar():
    p = validate_params([3], [1])
    set_A, set_R, jac = dfe_spectrum_decomposition(p, Z1, Z1)
    np.testing.assert_allclose(set_A, [2.0])
    assert set_R.size == 0
    assert match_spectra(jac, [0.0, 2.0]) < 1e-12


def test_dfe_two_groups_known_eigenvalue():
    R = [[-1, 1], [1, -1]]
    Q = adversarial_Q(CASE_A)
    set_A, set_R, jac = dfe_spectrum_decomposition(CASE_A, R, Q)
    # pi = (1/2, 1/2): A = [[-1/2, 1/2], [1, -1/2]]
    assert np.min(np.abs(set_A - (-0.5 + np.sqrt(0.5)))) < 1e-12
    assert match_spectra(jac, np.concatenate([set_A, set_R, [0]])) < 1e-10


def test_dfe_degenerate_structure():
    Q = generator_from_offdiag([[0, 1, 2], [3, 0, 1], [1, 1, 0]])
    p = ModelParams(np.zeros(3), np.zeros(3))
    set_A, set_R, jac = dfe_spectrum_decomposition(p, Q, Q)
    eq = np.linalg.eigvals(Q.rates)
    assert match_spectra(set_A, eq) < 1e-10
    assert match_spectra(jac, np.concatenate([eq, eq])) < 1e-10


def test_dfe_jacobian_matches_finite_differences():
    R = generator_from_offdiag([[0, 1, 0.5], [0.3, 0, 2], [1, 1, 0]])
    Q = generator_from_offdiag([[0, 2, 0.1], [0.4, 0, 1], [3, 0.2, 0]])
    p = validate_params([1, 2, 3], [0.4, 0.7, 1.1])
    pi = stationary_distribution(R).probs
    J = dfe_jacobian(p, R, Q)
    np.testing.assert_allclose(J, dfe_jacobian_fd(p.beta, p.gamma, R.rates, Q.rates, pi), atol=1e-8)


def test_match_spectra_shape_mismatch():
    assert match_spectra([1, 2], [1]) == np.inf


def test_ngm_density_radius_is_omega():
    K = ngm_ode(CASE_A, r0_optimal_pi(CASE_A), Q1)
    assert np.max(np.abs(np.linalg.eigvals(K))) == pytest.approx(4 / 3, abs=1e-12)


def test_ngm_frequency_ignores_pi():
    a = ngm_ode(CASE_A, [0.9, 0.1], Q1, "frequency")
    b = ngm_ode(CASE_A, [0.1, 0.9], Q1, "frequency")
    assert np.array_equal(a, b)


def test_ngm_frequency_scalar():
    np.testing.assert_allclose(ngm_ode(validate_params([3], [2]), [1.0], Z1, "frequency"), [[1.5]])


def test_ngm_unknown_variant():
    with pytest.raises(ValueError):
        ngm_ode(CASE_A, [0.5, 0.5], Q1, "mass-action")


@st.composite
def instances(draw):
    m = draw(st.integers(2, 4))
    beta = draw(st.lists(st.floats(0.1, 5.0), min_size=m, max_size=m))
    gamma = draw(st.lists(st.floats(0.05, 3.0), min_size=m, max_size=m))
    r = np.reshape(draw(st.lists(st.floats(0.01, 5.0), min_size=m * m, max_size=m * m)), (m, m))
    q = np.reshape(draw(st.lists(st.floats(0.01, 5.0), min_size=m * m, max_size=m * m)), (m, m))
    return validate_params(beta, gamma), generator_from_offdiag(r), generator_from_offdiag(q)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_dfe_spectrum_union(inst):
    p, R, Q = inst
    set_A, set_R, jac = dfe_spectrum_decomposition(p, R, Q)
    scale = max(1.0, np.abs(dfe_jacobian(p, R, Q)).max())
    assert match_spectra(jac, np.concatenate([set_A, set_R, [0]])) < 1e-8 * scale
