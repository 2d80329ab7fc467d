import numpy as np
import pytest

from epimm import (
    SearchBox,
    chi,
    inf_pi_sup_Q_tau,
    minimax_r0,
    minimax_tau,
    omega,
    r0_optimal_pi,
    sup_inf_tau,
    sup_r0_over_Q,
    sup_tau_over_Q,
    tau_optimal_pi,
    validate_params,
)
from epimm.errors import ValidationError

from oracles import grid_minimax_2, tau_2x2

CASE_A = validate_params([1, 2], [0.5, 0.5])


def test_search_box_validation():
    with pytest.raises(ValidationError):
        SearchBox(q_lo=1.0, q_hi=0.5)
    with pytest.raises(ValidationError):
        SearchBox(pi_floor=0)
    with pytest.raises(ValidationError):
        SearchBox(multistarts=0)
    with pytest.raises(ValidationError):
        SearchBox(pi_floor=0.6).check(2)


def test_sup_tau_flat_at_saddle():
    v, _ = sup_tau_over_Q(CASE_A, tau_optimal_pi(CASE_A).probs)
    assert v == pytest.approx(1 / 6, abs=1e-6)


def test_sup_tau_scalar():
    v, Q = sup_tau_over_Q(validate_params([2], [0.5]), [1.0])
    assert v == pytest.approx(1.5)
    assert Q.m == 1


def test_sup_tau_off_saddle_matches_rate_grid():
    pi = [0.99, 0.01]
    v, _ = sup_tau_over_Q(CASE_A, pi)
    q = np.geomspace(1e-6, 1e3, 400)
    grid = tau_2x2(CASE_A.beta, CASE_A.gamma, 0.99, q[:, None], q[None, :]).max()
    assert v >= 1 / 6
    assert v == pytest.approx(grid, abs=1e-6)
    assert v == pytest.approx(0.49, abs=1e-6)


def test_upper_game_case_a():
    res = inf_pi_sup_Q_tau(CASE_A)
    assert res.value == pytest.approx(1 / 6, abs=1e-4)
    np.testing.assert_allclose(res.pi_arg.probs, [2 / 3, 1 / 3], atol=1e-4)


def test_upper_game_vertical_regime():
    res = inf_pi_sup_Q_tau(validate_params([1, 2], [0.2, 3.5]))
    assert res.value == pytest.approx(-0.2, abs=1e-3)


def test_upper_game_puts_no_mass_on_failing_group():
    p = validate_params([1, 2], [2, 0.1])
    res = inf_pi_sup_Q_tau(p)
    assert res.pi_arg.probs[1] < 1e-6
    assert res.value == pytest.approx(-0.1, abs=1e-3)


def test_lower_game_case_a():
    low = sup_inf_tau(CASE_A)
    up = inf_pi_sup_Q_tau(CASE_A)
    assert low.value == pytest.approx(1 / 6, abs=1e-4)
    assert abs(up.value - low.value) < 1e-4


def test_lower_game_vertical_regime():
    assert sup_inf_tau(validate_params([1, 2], [0.2, 3.5])).value == pytest.approx(-0.2, abs=1e-3)


def test_single_group_games():
    p = validate_params([2], [0.5])
    res = minimax_tau(p)
    assert res.inf_sup == pytest.approx(1.5)
    assert res.sup_inf == pytest.approx(1.5)
    assert minimax_r0(p).inf_sup == pytest.approx(4.0)


def test_r0_game_case_a():
    res = minimax_r0(CASE_A)
    assert res.inf_sup == pytest.approx(4 / 3, abs=1e-4)
    assert abs(res.gap) < 1e-4
    np.testing.assert_allclose(res.pi_arg.probs, [2 / 3, 1 / 3], atol=1e-3)


@pytest.mark.parametrize("gamma", [[0.5, 0.5], [1, 0.25], [0.3, 1.2]])
def test_sup_r0_flat_at_r0_optimum(gamma):
    p = validate_params([1, 2], gamma)
    v, _ = sup_r0_over_Q(p, r0_optimal_pi(p).probs)
    assert v == pytest.approx(omega(p), rel=1e-6)


def test_r0_game_needs_recovery():
    with pytest.raises(ValidationError):
        minimax_r0(validate_params([1, 2], [0.5, 0.0]))


def test_three_groups():
    p = validate_params([1, 2, 3], [0.5, 0.5, 0.5])
    res = minimax_tau(p)
    assert res.inf_sup == pytest.approx(chi(p), abs=1e-4)
    assert abs(res.gap) < 1e-4
    np.testing.assert_allclose(res.pi_arg.probs, tau_optimal_pi(p).probs, atol=1e-3)


def test_deterministic():
    a = minimax_tau(CASE_A)
    b = minimax_tau(CASE_A)
    assert a.inf_sup == b.inf_sup and a.sup_inf == b.sup_inf
    np.testing.assert_array_equal(a.pi_arg.probs, b.pi_arg.probs)


# frozen values from the exhaustive grid oracle in oracles.grid_minimax_2
GRID_ORACLE = [
    ((0.5, 0.5), 0.166700335516623),
    ((0.2, 3.5), -0.20000000029835974),
    ((1.0, 1.5), -0.49998737405621796),
]


@pytest.mark.parametrize("gamma, expected", GRID_ORACLE)
def test_matches_frozen_grid_oracle(gamma, expected):
    res = inf_pi_sup_Q_tau(validate_params([1, 2], gamma))
    assert res.value == pytest.approx(expected, abs=1e-3)


def test_grid_oracle_reproduces_frozen_value():
    v, _ = grid_minimax_2(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    assert v == pytest.approx(GRID_ORACLE[0][1], abs=1e-12)
