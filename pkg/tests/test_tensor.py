import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcrlab.tensor import (
    VectorPolynomial,
    chebyshev_nodes,
    divided_differences,
    evaluate,
    interpolate,
    lagrange_weights,
    newton_evaluate,
    partition,
)


def test_partition_toy():
    X = np.array([[1, 2], [3, 4], [5, 6], [7, 8]], dtype=float)
    X0, X1 = partition(X, 2)
    np.testing.assert_array_equal(X0, [[1, 3], [2, 4]])
    np.testing.assert_array_equal(X1, [[5, 7], [6, 8]])


def test_partition_single_block_is_transpose():
    X = np.arange(6.0).reshape(3, 2)
    (only,) = partition(X, 1)
    np.testing.assert_array_equal(only, X.T)


def test_partition_round_trip_bitwise():
    X = np.random.default_rng(0).normal(size=(12, 3))
    blocks = partition(X, 4)
    assert all(b.shape == (3, 3) for b in blocks)
    np.testing.assert_array_equal(np.concatenate(blocks, axis=1), X.T)


def test_partition_rejects_uneven():
    with pytest.raises(ValueError):
        partition(np.zeros((5, 2)), 2)


def test_lagrange_weights_examples():
    np.testing.assert_allclose(lagrange_weights([0, -1], 2), [3, -2])
    np.testing.assert_allclose(lagrange_weights([0, -1], 0), [1, 0])
    w = lagrange_weights(chebyshev_nodes(4), 0.3)
    assert abs(w.sum() - 1) < 1e-12


def test_lagrange_weights_delta_at_nodes():
    nodes = chebyshev_nodes(5)
    for t, a in enumerate(nodes):
        np.testing.assert_allclose(lagrange_weights(nodes, a), np.eye(5)[t], atol=1e-14)


def test_lagrange_weights_duplicate_nodes():
    with pytest.raises(ValueError):
        lagrange_weights([0.0, 1.0, 0.0], 0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8, unique=True), st.floats(-10, 10))
def test_partition_of_unity(nodes, x):
    nodes = np.array(nodes)
    if len(nodes) > 1 and np.min(np.diff(np.sort(nodes))) < 1e-2:
        return
    # Sum stays 1 in exact arithmetic; tolerance scales with the weights' size.
    w = lagrange_weights(nodes, x)
    assert abs(w.sum() - 1) <= 1e-10 * max(1.0, np.abs(w).sum())


def test_interpolate_square():
    poly = interpolate([(0, np.array([0.0])), (1, np.array([1.0])), (2, np.array([4.0]))])
    assert poly.degree == 2
    np.testing.assert_allclose(poly.coeffs, [[0], [0], [1]], atol=1e-12)
    np.testing.assert_allclose(evaluate(poly, 3), [9.0])


def test_interpolate_single_point():
    v = np.array([1.0, -2.0, 3.5])
    poly = interpolate([(5.0, v)])
    assert poly.degree == 0
    np.testing.assert_array_equal(poly.coeffs[0], v)
    np.testing.assert_array_equal(evaluate(poly, -17.0), v)


def test_interpolate_duplicate_x():
    with pytest.raises(ValueError):
        interpolate([(1.0, np.zeros(2)), (1.0, np.ones(2))])


def test_interpolate_degree6_round_trip():
    rng = np.random.default_rng(1)
    true = VectorPolynomial(rng.normal(size=(7, 4)))
    xs = rng.uniform(-1, 1, 7)
    got = interpolate([(x, true(x)) for x in xs])
    assert np.abs(got.coeffs - true.coeffs).max() / np.abs(true.coeffs).max() < 1e-8
    for x in xs:
        np.testing.assert_allclose(evaluate(got, x), true(x), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("deg", [0, 1, 4, 8, 12, 16])
def test_round_trip_chebyshev_up_to_degree_16(deg):
    rng = np.random.default_rng(deg)
    true = VectorPolynomial(rng.normal(size=(deg + 1, 3)))
    xs = chebyshev_nodes(deg + 1)
    got = interpolate([(x, true(x)) for x in xs])
    assert np.abs(got.coeffs - true.coeffs).max() / np.abs(true.coeffs).max() <= 1e-7


def test_evaluate_linear_in_coefficients():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b = rng.normal(size=(2, 6, 3))
        s, t, x = rng.normal(size=3)
        lhs = evaluate(VectorPolynomial(s * a + t * b), x)
        rhs = s * evaluate(VectorPolynomial(a), x) + t * evaluate(VectorPolynomial(b), x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_newton_matches_monomial_form():
    rng = np.random.default_rng(3)
    xs = chebyshev_nodes(6)
    vals = rng.normal(size=(6, 2))
    coef = divided_differences(xs, vals)
    poly = interpolate(list(zip(xs, vals)))
    for x in (-0.9, 0.1, 0.77):
        np.testing.assert_allclose(newton_evaluate(xs, coef, x), evaluate(poly, x), atol=1e-12)


def test_chebyshev_nodes():
    np.testing.assert_allclose(chebyshev_nodes(1), [0.0])
    np.testing.assert_allclose(chebyshev_nodes(2), [1.0, -1.0])
    np.testing.assert_allclose(chebyshev_nodes(3), [1.0, 0.0, -1.0], atol=0)
    nodes = chebyshev_nodes(9)
    assert np.all(np.abs(nodes) <= 1)
    assert np.all(np.diff(nodes) < 0)
    gaps = np.abs(nodes[:, None] - nodes[None, :]) + np.eye(9)
    assert gaps.min() >= 1e-2
