"""Least-squares regression, synthetic data, and Nesterov-accelerated descent."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    w_true: np.ndarray
    seed: int | None = None

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def generate_dataset(m: int, d: int, seed: int | None = 0) -> Dataset:
    """Noise-free data from a symmetric two-component Gaussian mixture.

    ``w* ~ U[0,1]^d``; each row is drawn from N(+-1.5 w*/d, I) with equal
    probability and labelled ``y = X w*``.
    """
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    rng = np.random.default_rng(seed)
    w_true = rng.uniform(0.0, 1.0, size=d)
    mu = (1.5 / d) * w_true
    signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    X = rng.standard_normal((m, d)) + signs[:, None] * mu[None, :]
    return Dataset(X, X @ w_true, w_true, seed)


def loss(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    r = X @ w - y
    return float(r @ r) / X.shape[0]


def full_gradient(X: np.ndarray, y: np.ndarray, w: np.ndarray, Xty: np.ndarray | None = None) -> np.ndarray:
    """``(2/m) (X^T X w - X^T y)``; pass a cached ``Xty`` to skip recomputing it."""
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.ndim != 2 or w.shape != (X.shape[1],) or np.shape(y) != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {np.shape(y)}, w {w.shape}")
    if Xty is None:
        Xty = X.T @ y
    return (2.0 / X.shape[0]) * (X.T @ (X @ w) - Xty)


def lambda_max(X: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of the Hessian (2/m) X^T X."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        u = X.T @ (X @ v)
        lam = float(np.linalg.norm(u))
        if lam == 0.0:
            return 0.0
        v = u / lam
    return 2.0 * lam / X.shape[0]


class Executor(Protocol):
    """Supplies ``X^T X v`` for the broadcast vector ``v``; may return a trace."""

    def __call__(self, v: np.ndarray): ...


class CentralizedExecutor:
    def __init__(self, X: np.ndarray):
        self.X = X

    def __call__(self, v):
        return self.X.T @ (self.X @ v), None


@dataclass
class GdConfig:
    iterations: int = 100
    learning_rate: float | None = None  # None -> 0.2 / lambda_max estimate
    momentum: float = 0.9

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate is not None and self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class GdTrajectory:
    weights: list = field(default_factory=list)  # w^(0), ..., w^(T)
    losses: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    learning_rate: float = 0.0

    def to_csv(self, path, reference: "GdTrajectory | None" = None) -> None:
        write_trajectory_csv(path, self, reference)


class IterationFailed(RuntimeError):
    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"iteration {iteration}: {cause}")


def default_learning_rate(X: np.ndarray) -> float:
    lam = lambda_max(X)
    return 0.2 / lam if lam > 0 else 0.0


def run_gd(dataset: Dataset, config: GdConfig, executor: Executor | Callable | None = None,
           w0: np.ndarray | None = None) -> GdTrajectory:
    """Nesterov descent with constant momentum; the executor provides ``X^T X v``.

    Update: ``v = w + mu (w - w_prev)``, ``w_next = v - eta (2/m)(X^T X v - X^T y)``.
    """
    X, y = dataset.X, dataset.y
    m = dataset.m
    executor = executor or CentralizedExecutor(X)
    eta = default_learning_rate(X) if config.learning_rate is None else config.learning_rate
    Xty = X.T @ y  # constant across iterations
    w = np.zeros(dataset.d) if w0 is None else np.array(w0, dtype=np.float64)
    w_prev = w.copy()
    traj = GdTrajectory(learning_rate=eta)
    traj.weights.append(w.copy())
    traj.losses.append(loss(X, y, w))
    for t in range(config.iterations):
        v = w + config.momentum * (w - w_prev)
        try:
            XtXv, trace = executor(v)
        except Exception as exc:
            raise IterationFailed(t, exc) from exc
        grad = (2.0 / m) * (XtXv - Xty)
        w_prev, w = w, v - eta * grad
        traj.weights.append(w.copy())
        traj.losses.append(loss(X, y, w))
        traj.traces.append(trace)
    return traj


def max_relative_deviation(a: GdTrajectory, b: GdTrajectory) -> float:
    """Largest per-iterate ``|w_a - w_b| / max(|w_b|, tiny)`` across the run."""
    dev = 0.0
    for wa, wb in zip(a.weights, b.weights):
        scale = max(np.linalg.norm(wb), 1e-300)
        dev = max(dev, float(np.linalg.norm(wa - wb) / scale) if np.any(wa != wb) else 0.0)
    return dev


TRAJECTORY_COLUMNS = ("iteration", "loss", "deviation", "time_s")


def write_trajectory_csv(path, traj: GdTrajectory, reference: GdTrajectory | None = None) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRAJECTORY_COLUMNS)
        for t, (w, l) in enumerate(zip(traj.weights, traj.losses)):
            dev = 0.0
            if reference is not None:
                ref = reference.weights[t]
                dev = float(np.linalg.norm(w - ref) / max(np.linalg.norm(ref), 1e-300)) if np.any(w != ref) else 0.0
            trace = traj.traces[t - 1] if t > 0 else None
            time_s = getattr(trace, "total_s", 0.0) if trace is not None else 0.0
            out.writerow([t, repr(float(l)), repr(dev), repr(float(time_s))])
