import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimm import (
    GeneratorMatrix,
    InfectiveState,
    SimplexPoint,
    check_irreducible,
    generator_from_offdiag,
    stationary_distribution,
    validate_params,
)
from epimm.errors import (
    DimensionMismatch,
    LengthMismatch,
    MalformedGenerator,
    NegativeGamma,
    NonPositiveBeta,
    ValidationError,
)

from oracles import stationary_nullspace


def test_validate_params_accepts_two_groups():
    p = validate_params([1, 2], [0.5, 0.5])
    assert p.m == 2
    np.testing.assert_array_equal(p.beta, [1.0, 2.0])


def test_validate_params_single_group():
    assert validate_params([2], [1]).m == 1


def test_validate_params_rejects_zero_beta():
    with pytest.raises(NonPositiveBeta):
        validate_params([1, 0], [1, 1])


def test_validate_params_rejects_negative_gamma():
    with pytest.raises(NegativeGamma):
        validate_params([1, 1], [1, -0.1])


def test_validate_params_rejects_length_mismatch():
    with pytest.raises(LengthMismatch):
        validate_params([1, 2, 3], [1, 1])


def test_validate_params_rejects_nan():
    with pytest.raises(ValidationError):
        validate_params([1, np.nan], [1, 1])


def test_validate_params_idempotent():
    p = validate_params([1, 2], [0.5, 0.5])
    assert validate_params(p) == p


def test_params_are_read_only():
    p = validate_params([1, 2], [0.5, 0.5])
    with pytest.raises(ValueError):
        p.beta[0] = 5.0


def test_simplex_sum_tolerance():
    SimplexPoint([0.5, 0.5 + 5e-13])
    with pytest.raises(ValidationError):
        SimplexPoint([0.5, 0.5 + 1e-9])
    with pytest.raises(ValidationError):
        SimplexPoint([1.1, -0.1])


def test_simplex_interior_flag():
    assert SimplexPoint([0.5, 0.5]).interior
    assert not SimplexPoint([1.0, 0.0]).interior


@pytest.mark.parametrize(
    "G, expected",
    [
        ([[-1, 1], [1, -1]], True),
        ([[-1, 1], [0, 0]], False),
        ([[-0.5, 0.5], [1, -1]], True),
        ([[0.0]], True),
        ([[-1, 1, 0], [0, -1, 1], [1, 0, -1]], True),
        ([[-1, 1, 0], [1, -1, 0], [0, 0, 0]], False),
    ],
)
def test_check_irreducible(G, expected):
    assert check_irreducible(GeneratorMatrix(G)) is expected


def test_generator_row_sums_checked():
    with pytest.raises(MalformedGenerator):
        GeneratorMatrix([[-1, 1], [1, -0.5]])
    with pytest.raises(MalformedGenerator):
        GeneratorMatrix([[1, -1], [1, -1]])
    with pytest.raises(MalformedGenerator):
        GeneratorMatrix([[-1, 1, 0], [1, -1, 0]])
    with pytest.raises(DimensionMismatch):
        GeneratorMatrix([-1, 1])


def test_generator_from_offdiag_sets_diagonal():
    G = generator_from_offdiag([[9, 2], [3, 9]])
    np.testing.assert_array_equal(G.rates, [[-2, 2], [3, -3]])


@pytest.mark.parametrize(
    "G, expected",
    [
        ([[-1, 1], [1, -1]], [0.5, 0.5]),
        ([[-0.5, 0.5], [1, -1]], [2 / 3, 1 / 3]),
        ([[0.0]], [1.0]),
    ],
)
def test_stationary_distribution_examples(G, expected):
    np.testing.assert_allclose(stationary_distribution(G).probs, expected, atol=1e-14)


def test_stationary_distribution_three_groups_frozen():
    # null-space oracle value
    G = [[-1.5, 1, 0.5], [0.2, -0.2, 0], [0.3, 0.4, -0.7]]
    expected = [0.12280701754385967, 0.7894736842105261, 0.08771929824561421]
    np.testing.assert_allclose(stationary_distribution(G).probs, expected, atol=1e-13)


def test_stationary_rejects_reducible():
    with pytest.raises(ValidationError):
        stationary_distribution([[-1, 1], [0, 0]])


def test_infective_state():
    s = InfectiveState([2, 1])
    assert s.total == 3
    with pytest.raises(ValidationError):
        InfectiveState([-1, 0])


@st.composite
def irreducible_generators(draw, m_max=5):
    m = draw(st.integers(2, m_max))
    rates = draw(st.lists(st.floats(0.01, 10.0), min_size=m * m, max_size=m * m))
    return generator_from_offdiag(np.reshape(rates, (m, m)))


@settings(max_examples=60, deadline=None)
@given(irreducible_generators())
def test_stationary_matches_nullspace(G):
    pi = stationary_distribution(G)
    np.testing.assert_allclose(pi.probs, stationary_nullspace(G.rates), atol=1e-10)
    np.testing.assert_allclose(pi.probs @ G.rates, 0.0, atol=1e-10 * np.abs(G.rates).max())
