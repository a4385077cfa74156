"""Dense linear algebra helpers and the Lagrange/Newton polynomial toolkit.

Matrices and vectors are plain float64 numpy arrays. Vector-valued
polynomials keep their coefficients as a ``(degree + 1, dim)`` array in
increasing-power order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class VectorPolynomial:
    """Polynomial whose coefficients are length-``dim`` vectors."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("coeffs must have shape (degree + 1, dim)")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, x: float) -> np.ndarray:
        return evaluate(self, x)


def _check_distinct(xs: np.ndarray, what: str) -> None:
    if len(np.unique(xs)) != len(xs):
        raise ValueError(f"{what} must be pairwise distinct, got {xs.tolist()}")


def partition(X: np.ndarray, n: int) -> list[np.ndarray]:
    """Split the ``m x d`` feature matrix into ``n`` blocks of shape ``d x m/n``.

    Block ``j`` is the transpose of rows ``[j*m/n, (j+1)*m/n)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    if n < 1:
        raise ValueError("n must be >= 1")
    m = X.shape[0]
    if m % n:
        raise ValueError(f"m={m} is not divisible by n={n}; pad the data first")
    step = m // n
    return [np.ascontiguousarray(X[j * step:(j + 1) * step].T) for j in range(n)]


def lagrange_weights(alphas: Sequence[float], x: float) -> np.ndarray:
    """Values of the Lagrange basis polynomials over ``alphas`` at ``x``."""
    a = np.asarray(alphas, dtype=np.float64)
    _check_distinct(a, "alphas")
    k = len(a)
    w = np.ones(k)
    for i in range(k):
        for t in range(k):
            if t != i:
                w[i] *= (x - a[t]) / (a[i] - a[t])
    return w


def divided_differences(xs: Sequence[float], values: np.ndarray) -> np.ndarray:
    """Newton divided-difference coefficients for vector-valued samples.

    Returns a ``(k, dim)`` array; row ``i`` is ``f[x_0, ..., x_i]``.
    """
    x = np.asarray(xs, dtype=np.float64)
    _check_distinct(x, "interpolation nodes")
    coef = np.array(values, dtype=np.float64, copy=True)
    if coef.ndim == 1:
        coef = coef[:, None]
    k = len(x)
    for j in range(1, k):
        coef[j:] = (coef[j:] - coef[j - 1:-1]) / (x[j:] - x[:k - j])[:, None]
    return coef


def newton_evaluate(xs: Sequence[float], coef: np.ndarray, x: float) -> np.ndarray:
    """Horner evaluation of the Newton form built by :func:`divided_differences`."""
    xs = np.asarray(xs, dtype=np.float64)
    out = coef[-1].copy()
    for j in range(len(xs) - 2, -1, -1):
        out = coef[j] + (x - xs[j]) * out
    return out


def interpolate(points: Sequence[tuple[float, np.ndarray]]) -> VectorPolynomial:
    """Interpolating vector polynomial of degree ``len(points) - 1``."""
    if len(points) < 1:
        raise ValueError("need at least one point")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    vals = np.array([np.atleast_1d(np.asarray(p[1], dtype=np.float64)) for p in points])
    coef = divided_differences(xs, vals)
    # Newton -> monomial by nested multiplication: p <- coef[j] + (x - xs[j]) * p
    k = len(xs)
    mono = np.zeros((k, vals.shape[1]))
    mono[0] = coef[-1]
    for j in range(k - 2, -1, -1):
        shifted = np.zeros_like(mono)
        shifted[1:] = mono[:-1]
        mono = shifted - xs[j] * mono
        mono[0] += coef[j]
    return VectorPolynomial(mono)


def evaluate(poly: VectorPolynomial, x: float) -> np.ndarray:
    c = poly.coeffs
    out = c[-1].copy()
    for j in range(c.shape[0] - 2, -1, -1):
        out = out * x + c[j]
    return out


def chebyshev_nodes(k: int) -> np.ndarray:
    """``k`` Chebyshev extrema ``cos(pi t / (k - 1))`` on [-1, 1], decreasing."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return np.zeros(1)
    nodes = np.cos(np.pi * np.arange(k) / (k - 1))
    # cos(pi/2) is 6e-17 in floating point; snap the exact midpoint.
    if k % 2 == 1:
        nodes[k // 2] = 0.0
    return nodes
