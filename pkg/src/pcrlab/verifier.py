"""Empirical recovery thresholds and the rank certificate for the converse bound."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import DecodeError
from .schemes import Scheme, SchemeKind, SchemeSpec, pcr_decode_matrix, recovery_threshold
from .tensor import partition

MAX_EXHAUSTIVE_N = 14


@dataclass
class ThresholdReport:
    scheme: str
    n: int
    r: int
    measured_K: int
    predicted_K: int
    subsets_tested: int
    max_decode_error: float
    worst_condition_number: float
    failing_subset: tuple[int, ...] | None = None
    exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return self.measured_K == self.predicted_K

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RankCertificate:
    subset: tuple[int, ...]
    stacked_rank: int
    required_rank: int

    @property
    def decodable_possible(self) -> bool:
        return self.stacked_rank >= self.required_rank

    def to_dict(self) -> dict:
        return {**asdict(self), "decodable_possible": self.decodable_possible}


def _instance(spec: SchemeSpec, m: int | None, d: int, seed: int):
    rng = np.random.default_rng(seed)
    m = m or 2 * spec.n
    X = rng.standard_normal((m, d))
    w = rng.standard_normal(d)
    return X, w, X.T @ (X @ w)


def _relative_error(got: np.ndarray, want: np.ndarray) -> float:
    return float(np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300))


def decode_condition(scheme: Scheme, subset: Sequence[int]) -> float:
    """Noise amplification of the decoding map for ``subset``.

    PCR: l1-norm of the combined Lagrange weights taking worker payloads to
    ``sum_i h(alpha_i)``. GC: 2-norm condition number of the combination rows.
    """
    subset = list(subset)
    if scheme.kind is SchemeKind.PCR:
        return float(np.abs(pcr_decode_matrix(scheme.spec, subset[: scheme.threshold])).sum())
    if scheme.kind is SchemeKind.GC:
        return float(np.linalg.cond(scheme.gc_design.B[subset[: scheme.threshold]]))
    return 1.0


def measure_threshold(spec: SchemeSpec, m: int | None = None, d: int = 3, seed: int = 0,
                      tol: float = 1e-6, scheme: Scheme | None = None,
                      samples: int | None = None) -> ThresholdReport:
    """Smallest k such that every k-subset of workers decodes within ``tol``.

    Decoders run without their threshold guard, so sub-threshold subsets fail
    on their own (wrong answer or singular system), not by fiat. With
    ``samples`` set (required above n=14) each k is checked on that many
    random subsets instead, which is evidence rather than proof.
    """
    scheme = scheme or Scheme(spec)
    if scheme.threshold is None:
        recovery_threshold(spec)  # raises NoFixedThresholdError
    n = spec.n
    if samples is None and n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"n={n} exceeds exhaustive bound {MAX_EXHAUSTIVE_N}; pass samples=")
    X, w, oracle = _instance(spec, m, d, seed)
    shards = scheme.place(partition(X, n))
    results = [scheme.compute(s, w) for s in shards]
    rng = np.random.default_rng(seed + 1)

    def subsets(k):
        if samples is None:
            yield from itertools.combinations(range(n), k)
        else:
            for _ in range(samples):
                yield tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))

    def attempt(S):
        try:
            out = scheme.decode([results[j] for j in S], enforce_threshold=False)
        except DecodeError:
            return math.inf
        return _relative_error(out.gradient_part, oracle)

    tested = 0
    failing = None
    for k in range(1, n + 1):
        worst_err, worst_cond, all_ok = 0.0, 0.0, True
        for S in subsets(k):
            tested += 1
            err = attempt(S)
            if err > tol:
                all_ok = False
                failing = S
                break
            worst_err = max(worst_err, err)
            worst_cond = max(worst_cond, decode_condition(scheme, S))
        if all_ok:
            return ThresholdReport(spec.kind.value, n, spec.r, k, scheme.threshold, tested,
                                   worst_err, worst_cond, failing, samples is None)
    raise AssertionError("the full worker set failed to decode")


def sampled_decode_check(spec: SchemeSpec, k: int, samples: int, m: int | None = None,
                         d: int = 3, seed: int = 0) -> float:
    """Worst relative decode error over ``samples`` random ``k``-subsets."""
    scheme = Scheme(spec)
    X, w, oracle = _instance(spec, m, d, seed)
    shards = scheme.place(partition(X, spec.n))
    results = [scheme.compute(s, w) for s in shards]
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(samples):
        S = rng.permutation(spec.n)[:k]
        out = scheme.decode([results[j] for j in S])
        worst = max(worst, _relative_error(out.gradient_part, oracle))
    return worst


def encoding_map(scheme: Scheme, subset: Sequence[int], m: int, d: int) -> np.ndarray:
    """Stacked linear map from the ``d*m`` entries of X to the shards held by ``subset``.

    Input is ordered block-major (block i's ``d*m/n`` entries contiguous); every
    shard is ``sum_i a[k, i] X_i``, so the map is ``A_S kron I``.
    """
    n = scheme.spec.n
    if m % n:
        raise ValueError("m must be divisible by n")
    X0 = np.zeros((m, d))
    shards = scheme.place(partition(X0, n))
    A = np.concatenate([shards[j].coeffs[:, :n] for j in subset], axis=0) if subset else np.zeros((0, n))
    return np.kron(A, np.eye(d * m // n))


def rank_lower_bound_check(spec: SchemeSpec, subset: Sequence[int], m: int | None = None,
                           d: int = 2, scheme: Scheme | None = None) -> RankCertificate:
    scheme = scheme or Scheme(spec)
    m = m or spec.n
    M = encoding_map(scheme, list(subset), m, d)
    if M.size == 0:
        rank = 0
    else:
        sv = np.linalg.svd(M, compute_uv=False)
        rank = int((sv > 1e-10 * sv[0]).sum()) if sv[0] > 0 else 0
    return RankCertificate(tuple(int(j) for j in subset), rank, d * m)


def sub_threshold_certificates(spec: SchemeSpec, m: int | None = None, d: int = 2):
    """Certificates for every subset of size ceil(n/r) - 1."""
    scheme = Scheme(spec)
    size = math.ceil(spec.n / spec.r) - 1
    return [rank_lower_bound_check(spec, S, m, d, scheme)
            for S in itertools.combinations(range(spec.n), size)]


def optimality_gap(spec: SchemeSpec) -> float:
    """K_PCR / ceil(n/r): PCR's threshold over the converse lower bound."""
    k = math.ceil(spec.n / spec.r)
    return (2 * k - 1) / k
