"""
Grids, weighted adjoints, commutator norms and eigenpairs
"""

import numpy as np
import pytest

from utils.errors import DimensionError
from utils.expsum import ExpSum
from utils.linops import (
    FOURIER_COEFFICIENTS,
    GRID_SAMPLES,
    Grid,
    GridFunction,
    LinearMap,
    commutator_norm,
    eigenpairs,
    operator_norm,
    quadrature,
    weighted_adjoint,
    weighted_norm,
)


class _Modes:
    """Minimal coefficient domain"""

    def __init__(self, size):
        self.size = size


def test_uniform_grid():
    g = Grid.uniform(11)
    assert g.h == pytest.approx(0.1)
    assert g.size == 11
    assert np.sum(g.weights) == pytest.approx(1.0)


def test_square_grid_weights():
    g = Grid.uniform(9, dimension=2)
    assert g.size == 81
    assert np.sum(g.weights) == pytest.approx(1.0)
    x, y = g.coordinates()
    assert x.shape == y.shape == (81,)


@pytest.mark.parametrize("n, dimension", [(4, 1), (16, 3)])
def test_invalid_grid(n, dimension):
    with pytest.raises(ValueError):
        Grid.uniform(n, dimension=dimension)


def test_trapezoid_is_exact_on_linear_functions():
    g = Grid.uniform(21)
    assert quadrature(g, g.nodes).real == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DimensionError):
        quadrature(g, np.ones(5))


def test_sample_keeps_closed_form():
    g = Grid.uniform(16)
    f = ExpSum.exp(-1.0)
    sampled = g.sample(f)
    assert sampled.closed_form is f
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(16), closed_form=f)


def test_weighted_adjoint_identity(rng):
    g = Grid.uniform(12)
    A = LinearMap(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)), GRID_SAMPLES, g)
    adj = weighted_adjoint(A)
    x = rng.normal(size=12) + 1j * rng.normal(size=12)
    y = rng.normal(size=12) + 1j * rng.normal(size=12)
    w = g.weights
    lhs = np.sum(w * (A.apply(x)) * np.conj(y))
    rhs = np.sum(w * x * np.conj(adj.apply(y)))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_commutator_of_diagonal_is_zero():
    A = LinearMap(np.diag([1.0, 2j, -3.0]), FOURIER_COEFFICIENTS, _Modes(3))
    assert commutator_norm(A) == 0.0


def test_commutator_of_shift():
    A = LinearMap(np.array([[0.0, 1.0], [0.0, 0.0]]), FOURIER_COEFFICIENTS, _Modes(2))
    assert commutator_norm(A) == pytest.approx(1.0)
    assert operator_norm(A) == pytest.approx(1.0)


def test_non_square_commutator_raises():
    A = LinearMap(np.ones((2, 3)), FOURIER_COEFFICIENTS, _Modes(2))
    with pytest.raises(DimensionError):
        commutator_norm(A)


def test_add_rejects_mixed_bases():
    g = Grid.uniform(8)
    A = LinearMap(np.eye(8), GRID_SAMPLES, g)
    B = LinearMap(np.eye(8), FOURIER_COEFFICIENTS, _Modes(8))
    with pytest.raises(DimensionError):
        A + B


def test_eigenpairs_sorted_by_modulus():
    A = LinearMap(np.diag([3.0, -1.0, 2j]), FOURIER_COEFFICIENTS, _Modes(3))
    values = [pair.value for pair in eigenpairs(A)]
    np.testing.assert_allclose(np.abs(values), [1.0, 2.0, 3.0])
    assert all(pair.residual < 1e-14 for pair in eigenpairs(A))


def test_linear_map_rejects_non_finite():
    with pytest.raises(ValueError):
        LinearMap(np.array([[np.inf]]), FOURIER_COEFFICIENTS, _Modes(1))


def test_weighted_norm():
    assert weighted_norm(np.array([0.5, 0.5]), np.array([3.0, 4.0])) == pytest.approx(np.sqrt(12.5))
