"""Independent reference computations used by the tests.

These deliberately avoid the package's own encode/decode paths.
"""
from math import comb

import numpy as np


def dense_xtxw(X, w):
    return X.T @ (X @ w)


def rel_err(got, want):
    return float(np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300))


def worked_example_shard(parts, j, k):
    """n=6, r=3, alphas {0,-1}, integer betas: shard k of worker j is (j+1)X_k - j X_{k+3}."""
    return (j + 1) * parts[k] - j * parts[k + 3]


def coverage_tail(G, k):
    """P(k uniform draws over G classes miss at least one class), by inclusion-exclusion."""
    return sum((-1) ** (i + 1) * comb(G, i) * (1 - i / G) ** k for i in range(1, G + 1))


def coupon_collector_mean(G, n):
    """E[draws to cover G classes | covered within n draws]."""
    tail_n = coverage_tail(G, n)
    return sum(coverage_tail(G, k) - tail_n for k in range(n)) / (1 - tail_n)


def prob_kth_arrival_delayed(n, K, p):
    """Each of n workers is delayed independently with probability p.
    The K-th fastest is delayed iff fewer than K are on time."""
    q = 1 - p
    return sum(comb(n, j) * q ** j * p ** (n - j) for j in range(K))
