"""Encode / compute / decode for PCR and the baseline schemes.

Every scheme works on the zero-padded block list produced by
:func:`zero_pad`. A worker always stores ``r`` matrices of shape
``d x m/n`` and always returns a single length-``d`` vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoverageIncompleteError,
    InsufficientWorkersError,
    NoFixedThresholdError,
    SingularSubsetError,
)
from .tensor import chebyshev_nodes, divided_differences, lagrange_weights, newton_evaluate


class SchemeKind(str, Enum):
    UNCODED = "uncoded"
    REPETITION = "repetition"
    GC = "gc"
    PCR = "pcr"
    BCC = "bcc"


@dataclass(frozen=True)
class NodeConfig:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    @classmethod
    def integers(cls, n: int, r: int) -> "NodeConfig":
        """alphas 0, -1, ..., betas 0..n-1 (the small worked example's choice)."""
        k = math.ceil(n / r)
        return cls(tuple(-float(i) for i in range(k)), tuple(float(j) for j in range(n)))

    @classmethod
    def chebyshev(cls, n: int, r: int) -> "NodeConfig":
        k = math.ceil(n / r)
        return cls(tuple(chebyshev_nodes(k).tolist()), tuple(chebyshev_nodes(n).tolist()))

    @classmethod
    def systematic(cls, n: int, r: int) -> "NodeConfig":
        """Chebyshev betas with the alphas set to the first ceil(n/r) betas."""
        betas = chebyshev_nodes(n)
        k = math.ceil(n / r)
        return cls(tuple(betas[:k].tolist()), tuple(betas.tolist()))


@dataclass(frozen=True)
class SchemeSpec:
    kind: SchemeKind
    n: int
    r: int = 1
    nodes: NodeConfig | None = None
    seed: int | None = None

    def __post_init__(self):
        kind = SchemeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if kind is SchemeKind.UNCODED:
            object.__setattr__(self, "r", 1)
        if not 1 <= self.r <= self.n:
            raise ValueError(f"need 1 <= r <= n, got r={self.r}, n={self.n}")
        if kind is SchemeKind.PCR:
            nodes = self.nodes or NodeConfig.chebyshev(self.n, self.r)
            alphas = tuple(float(a) for a in nodes.alphas)
            betas = tuple(float(b) for b in nodes.betas)
            if len(alphas) != self.n_groups or len(set(alphas)) != len(alphas):
                raise ValueError(f"PCR needs {self.n_groups} distinct alphas, got {alphas}")
            if len(betas) != self.n or len(set(betas)) != len(betas):
                raise ValueError(f"PCR needs {self.n} distinct betas, got {betas}")
            object.__setattr__(self, "nodes", NodeConfig(alphas, betas))
        elif self.nodes is not None:
            raise ValueError("node_config only applies to PCR")

    @property
    def n_groups(self) -> int:
        """ceil(n / r): number of alphas for PCR, super-batches for BCC."""
        return math.ceil(self.n / self.r)

    @property
    def n_padded(self) -> int:
        return self.r * self.n_groups


@dataclass(frozen=True)
class ShardSet:
    worker_id: int
    shards: np.ndarray  # (r, d, m/n)
    coeffs: np.ndarray  # (r, n_padded); shard k = sum_i coeffs[k, i] * X_i
    combo: np.ndarray | None = None  # per-shard weights of the local partial products

    @property
    def r(self) -> int:
        return self.shards.shape[0]

    @property
    def stored_floats(self) -> int:
        return int(self.shards.size)


@dataclass(frozen=True)
class WorkerResult:
    worker_id: int
    payload: np.ndarray
    compute_multiplications: int = 0


@dataclass
class DecodeOutcome:
    gradient_part: np.ndarray
    used_workers: tuple[int, ...]
    decode_multiplications: int = 0
    coefficients: np.ndarray | None = None


# -- shared plumbing -------------------------------------------------------


def recovery_threshold(spec: SchemeSpec) -> int:
    n, r = spec.n, spec.r
    if spec.kind is SchemeKind.UNCODED:
        return n
    if spec.kind is SchemeKind.REPETITION:
        if n % r:
            raise ValueError(f"repetition needs r | n, got n={n}, r={r}")
        return n - r + 1
    if spec.kind is SchemeKind.GC:
        return n - r + 1
    if spec.kind is SchemeKind.PCR:
        return 2 * spec.n_groups - 1
    raise NoFixedThresholdError(spec.kind.value)


def zero_pad(parts: Sequence[np.ndarray], n: int, r: int) -> list[np.ndarray]:
    if len(parts) != n:
        raise ValueError(f"expected {n} blocks, got {len(parts)}")
    extra = r * math.ceil(n / r) - n
    zero = np.zeros_like(parts[0])
    return list(parts) + [zero.copy() for _ in range(extra)]


def _padded(parts: Sequence[np.ndarray], spec: SchemeSpec) -> list[np.ndarray]:
    if len(parts) == spec.n_padded:
        return list(parts)
    return zero_pad(parts, spec.n, spec.r)


def encode_with(coeffs: np.ndarray, parts: Sequence[np.ndarray]) -> np.ndarray:
    """Stack of linear combinations ``sum_i coeffs[k, i] * parts[i]``.

    Accumulated term by term over nonzero weights so integer-weight
    combinations come out exactly as written by hand.
    """
    out = np.zeros((coeffs.shape[0],) + parts[0].shape)
    for k, row in enumerate(coeffs):
        for i in np.flatnonzero(row):
            out[k] += row[i] * parts[i]
    return out


def worker_compute(shard_set: ShardSet, w: np.ndarray) -> WorkerResult:
    """``sum_k c_k S_k S_k^T w`` over the stored shards (``c_k = 1`` unless a combo is set)."""
    S = shard_set.shards
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != S.shape[1]:
        raise ValueError(f"w has shape {w.shape}, shards expect dim {S.shape[1]}")
    inner = np.einsum("kdc,d->kc", S, w)
    if shard_set.combo is not None:
        inner = inner * shard_set.combo[:, None]
    payload = np.einsum("kdc,kc->d", S, inner)
    r, d, cols = S.shape
    return WorkerResult(shard_set.worker_id, payload, 2 * r * d * cols)


def _check_distinct_workers(results: Sequence[WorkerResult]) -> None:
    ids = [res.worker_id for res in results]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate worker_id in results: {ids}")


def _one_hot(r: int, n_padded: int, blocks: Iterable[int]) -> np.ndarray:
    A = np.zeros((r, n_padded))
    for k, i in enumerate(blocks):
        A[k, i] = 1.0
    return A


# -- uncoded ---------------------------------------------------------------


def uncoded_place(parts: Sequence[np.ndarray], spec: SchemeSpec) -> list[ShardSet]:
    n = spec.n
    out = []
    for j in range(n):
        A = _one_hot(1, n, [j])
        out.append(ShardSet(j, parts[j][None].copy(), A))
    return out


uncoded_compute = worker_compute


def uncoded_decode(results: Sequence[WorkerResult], spec: SchemeSpec,
                   enforce_threshold: bool = True) -> DecodeOutcome:
    _check_distinct_workers(results)
    have = {res.worker_id for res in results}
    missing = [j for j in range(spec.n) if j not in have]
    if missing and enforce_threshold:
        raise InsufficientWorkersError(spec.n, len(results), missing)
    if not results:
        raise InsufficientWorkersError(spec.n, 0, missing)
    total = np.sum([res.payload for res in results], axis=0)
    return DecodeOutcome(total, tuple(res.worker_id for res in results), 0)


# -- repetition ------------------------------------------------------------


def repetition_group(spec: SchemeSpec, worker: int) -> int:
    return worker % (spec.n // spec.r)


def repetition_place(parts: Sequence[np.ndarray], spec: SchemeSpec) -> list[ShardSet]:
    recovery_threshold(spec)  # validates r | n
    out = []
    for j in range(spec.n):
        g = repetition_group(spec, j)
        blocks = range(g * spec.r, (g + 1) * spec.r)
        out.append(ShardSet(j, np.stack([parts[i] for i in blocks]),
                            _one_hot(spec.r, spec.n, blocks)))
    return out


def repetition_decode(results: Sequence[WorkerResult], spec: SchemeSpec,
                      enforce_threshold: bool = True) -> DecodeOutcome:
    _check_distinct_workers(results)
    K = recovery_threshold(spec)
    if enforce_threshold:
        if len(results) < K:
            raise InsufficientWorkersError(K, len(results))
        results = results[:K]
    reps: dict[int, WorkerResult] = {}
    for res in results:
        g = repetition_group(spec, res.worker_id)
        if g not in reps or res.worker_id < reps[g].worker_id:
            reps[g] = res
    missing = [g for g in range(spec.n // spec.r) if g not in reps]
    if missing:
        raise CoverageIncompleteError(missing)
    picked = [reps[g] for g in sorted(reps)]
    total = np.sum([res.payload for res in picked], axis=0)
    return DecodeOutcome(total, tuple(res.worker_id for res in picked), 0)


# -- gradient coding (cyclic) ---------------------------------------------


@dataclass(frozen=True)
class GcDesign:
    """Cyclic combination matrix: row ``j`` is supported on blocks ``j..j+r-1 (mod n)``."""

    n: int
    r: int
    B: np.ndarray = field(repr=False)

    def combo(self, worker: int) -> np.ndarray:
        return np.array([self.B[worker, (worker + k) % self.n] for k in range(self.r)])


def cyclic_gc_design(n: int, r: int, nodes: Sequence[float] | None = None,
                     col_poly: Sequence[float] | None = None,
                     row_scale: Sequence[float] | None = None) -> GcDesign:
    """Generalized Reed-Solomon cyclic design.

    ``B[j, i] = row_scale[j] * prod_{t outside window j} (theta_i - theta_t) / P(theta_i)``
    where ``P`` (coefficients in increasing powers, degree <= n - r) fixes the
    column weights. Any ``n - r + 1`` rows span a space containing the
    all-ones row. Rows are scaled so their largest entry is +1 when ``row_scale`` is None.
    """
    theta = np.asarray(chebyshev_nodes(n) if nodes is None else nodes, dtype=np.float64)
    if len(theta) != n or len(np.unique(theta)) != n:
        raise ValueError("need n distinct design nodes")
    P = np.array([1.0] if col_poly is None else col_poly, dtype=np.float64)
    if len(P) - 1 > n - r:
        raise ValueError(f"column polynomial degree must be <= n - r = {n - r}")
    colw = 1.0 / np.polynomial.polynomial.polyval(theta, P)
    B = np.zeros((n, n))
    for j in range(n):
        window = [(j + k) % n for k in range(r)]
        outside = [t for t in range(n) if t not in window]
        for i in window:
            B[j, i] = np.prod(theta[i] - theta[outside]) * colw[i]
        if row_scale is None:
            B[j] /= B[j, np.argmax(np.abs(B[j]))]
        else:
            B[j] *= row_scale[j]
    return GcDesign(n, r, B)


def worked_example_gc_design() -> GcDesign:
    """n=6, r=3 design whose window {1,2,3,4} decodes with (2, -3, -3, -2).

    Integer nodes, column polynomial ``P(x) = 1 + x`` and row scales solved
    so that the master combines workers 1..4 with those coefficients.
    """
    scale = [1 / 12, 1 / 12, 1 / 18, -1 / 18, 1 / 12, 1 / 12]
    return cyclic_gc_design(6, 3, nodes=np.arange(6.0), col_poly=[1.0, 1.0], row_scale=scale)


def gc_place(parts: Sequence[np.ndarray], spec: SchemeSpec,
             design: GcDesign | None = None) -> list[ShardSet]:
    n, r = spec.n, spec.r
    design = design or cyclic_gc_design(n, r)
    parts = _padded(parts, spec)
    out = []
    for j in range(n):
        blocks = [(j + k) % n for k in range(r)]
        out.append(ShardSet(j, np.stack([parts[i] for i in blocks]),
                            _one_hot(r, spec.n_padded, blocks), design.combo(j)))
    return out


def gc_compute(shard_set: ShardSet, w: np.ndarray, combo: Sequence[float] | None = None) -> WorkerResult:
    if combo is not None:
        shard_set = ShardSet(shard_set.worker_id, shard_set.shards, shard_set.coeffs,
                             np.asarray(combo, dtype=np.float64))
    return worker_compute(shard_set, w)


def gc_decode(results: Sequence[WorkerResult], spec: SchemeSpec, design: GcDesign | None = None,
              enforce_threshold: bool = True) -> DecodeOutcome:
    _check_distinct_workers(results)
    K = recovery_threshold(spec)
    design = design or cyclic_gc_design(spec.n, spec.r)
    if len(results) < K and enforce_threshold:
        raise InsufficientWorkersError(K, len(results))
    if not results:
        raise InsufficientWorkersError(K, 0)
    used = list(results[:K])
    ids = [res.worker_id for res in used]
    M = design.B[ids]  # (k, n)
    ones = np.ones(spec.n)
    c, *_ = np.linalg.lstsq(M.T, ones, rcond=None)
    residual = float(np.abs(M.T @ c - ones).max())
    if residual > 1e-8 * max(1.0, float(np.abs(c).max())):
        raise SingularSubsetError(ids, residual)
    F = np.stack([res.payload for res in used])
    d = F.shape[1]
    return DecodeOutcome(c @ F, tuple(ids), d * len(used), c)


# -- polynomially coded regression ----------------------------------------


def pcr_coefficients(spec: SchemeSpec) -> np.ndarray:
    """``a[j, k, i]``: weight of padded block ``i`` in worker ``j``'s shard ``k``."""
    n, r, G = spec.n, spec.r, spec.n_groups
    alphas = spec.nodes.alphas
    A = np.zeros((n, r, spec.n_padded))
    for j, beta in enumerate(spec.nodes.betas):
        lw = lagrange_weights(alphas, beta)
        for k in range(r):
            for i in range(G):
                A[j, k, r * i + k] = lw[i]
    return A


def pcr_encode(parts: Sequence[np.ndarray], spec: SchemeSpec) -> list[ShardSet]:
    if spec.kind is not SchemeKind.PCR:
        raise ValueError("pcr_encode needs a PCR spec")
    parts = _padded(parts, spec)
    A = pcr_coefficients(spec)
    return [ShardSet(j, encode_with(A[j], parts), A[j]) for j in range(spec.n)]


pcr_compute = worker_compute


def pcr_decode(results: Sequence[WorkerResult], spec: SchemeSpec,
               enforce_threshold: bool = True) -> DecodeOutcome:
    """Interpolate h from the first K results and return ``sum_i h(alpha_i)``."""
    _check_distinct_workers(results)
    K = recovery_threshold(spec)
    if len(results) < K and enforce_threshold:
        raise InsufficientWorkersError(K, len(results))
    if not results:
        raise InsufficientWorkersError(K, 0)
    used = list(results[:K])
    betas = [spec.nodes.betas[res.worker_id] for res in used]
    F = np.stack([res.payload for res in used])
    coef = divided_differences(betas, F)
    total = np.zeros(F.shape[1])
    for a in spec.nodes.alphas:
        total += newton_evaluate(betas, coef, a)
    k, d = F.shape
    mults = d * (k * (k - 1) // 2 + len(spec.nodes.alphas) * (k - 1))
    return DecodeOutcome(total, tuple(res.worker_id for res in used), mults)


def pcr_decode_matrix(spec: SchemeSpec, workers: Sequence[int]) -> np.ndarray:
    """Weights ``c_j`` with ``sum_i h(alpha_i) = sum_j c_j h(beta_j)`` over ``workers``."""
    betas = [spec.nodes.betas[j] for j in workers]
    return np.sum([lagrange_weights(betas, a) for a in spec.nodes.alphas], axis=0)


# -- batched coupon's collector -------------------------------------------


def bcc_assignment(spec: SchemeSpec, seed: int | None = None,
                   require_coverage: bool = True) -> tuple[int, ...]:
    """Uniform random super-batch per worker.

    With ``require_coverage`` the draw is repeated (same generator) until every
    super-batch is held by some worker, so the scheme can always finish.
    """
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    G = spec.n_groups
    while True:
        a = rng.integers(0, G, size=spec.n)
        if not require_coverage or len(np.unique(a)) == G:
            return tuple(int(x) for x in a)


def bcc_place(parts: Sequence[np.ndarray], spec: SchemeSpec,
              assignment: Sequence[int] | None = None) -> list[ShardSet]:
    if spec.kind is not SchemeKind.BCC:
        raise ValueError("bcc_place needs a BCC spec")
    parts = _padded(parts, spec)
    assignment = bcc_assignment(spec) if assignment is None else assignment
    r = spec.r
    out = []
    for j, g in enumerate(assignment):
        blocks = range(g * r, (g + 1) * r)
        out.append(ShardSet(j, np.stack([parts[i] for i in blocks]),
                            _one_hot(r, spec.n_padded, blocks)))
    return out


def _assignment_of(placement) -> list[int]:
    if placement and isinstance(placement[0], ShardSet):
        return [int(np.argmax(s.coeffs[0]) // s.r) for s in placement]
    return [int(g) for g in placement]


def bcc_missing(received: Iterable[int], placement, n_groups: int) -> list[int]:
    assignment = _assignment_of(placement)
    covered = {assignment[j] for j in received}
    return [g for g in range(n_groups) if g not in covered]


def bcc_ready(received: Iterable[int], placement, n_groups: int | None = None) -> bool:
    assignment = _assignment_of(placement)
    if n_groups is None:
        n_groups = max(assignment) + 1
    return not bcc_missing(received, assignment, n_groups)


def bcc_decode(results: Sequence[WorkerResult], placement, n_groups: int | None = None) -> DecodeOutcome:
    _check_distinct_workers(results)
    assignment = _assignment_of(placement)
    if n_groups is None:
        n_groups = max(assignment) + 1
    reps: dict[int, WorkerResult] = {}
    for res in results:
        g = assignment[res.worker_id]
        if g not in reps or res.worker_id < reps[g].worker_id:
            reps[g] = res
    missing = [g for g in range(n_groups) if g not in reps]
    if missing:
        raise CoverageIncompleteError(missing)
    picked = [reps[g] for g in range(n_groups)]
    total = np.sum([res.payload for res in picked], axis=0)
    return DecodeOutcome(total, tuple(res.worker_id for res in picked), 0)


def coverage_size(order: Sequence[int], assignment: Sequence[int], n_groups: int) -> int | None:
    """Number of arrivals (in ``order``) needed before every super-batch is covered."""
    seen: set[int] = set()
    for count, j in enumerate(order, start=1):
        seen.add(assignment[j])
        if len(seen) == n_groups:
            return count
    return None


# -- uniform front end -----------------------------------------------------


class Scheme:
    """One coded-computation scheme behind a common place/compute/ready/decode API."""

    def __init__(self, spec: SchemeSpec, gc_design: GcDesign | None = None,
                 bcc_placement: Sequence[int] | None = None):
        self.spec = spec
        self.kind = spec.kind
        self.gc_design = None
        self.assignment = None
        if spec.kind is SchemeKind.GC:
            self.gc_design = gc_design or cyclic_gc_design(spec.n, spec.r)
        elif spec.kind is SchemeKind.BCC:
            self.assignment = tuple(bcc_placement) if bcc_placement is not None else bcc_assignment(spec)
        self.threshold = None if spec.kind is SchemeKind.BCC else recovery_threshold(spec)

    def place(self, parts: Sequence[np.ndarray]) -> list[ShardSet]:
        kind = self.kind
        if kind is SchemeKind.UNCODED:
            return uncoded_place(parts, self.spec)
        if kind is SchemeKind.REPETITION:
            return repetition_place(parts, self.spec)
        if kind is SchemeKind.GC:
            return gc_place(parts, self.spec, self.gc_design)
        if kind is SchemeKind.PCR:
            return pcr_encode(parts, self.spec)
        return bcc_place(parts, self.spec, self.assignment)

    def compute(self, shard_set: ShardSet, w: np.ndarray) -> WorkerResult:
        return worker_compute(shard_set, w)

    def ready(self, received: Sequence[int]) -> bool:
        if self.kind is SchemeKind.BCC:
            return bcc_ready(received, self.assignment, self.spec.n_groups)
        return len(set(received)) >= self.threshold

    def completion_size(self, order: Sequence[int]) -> int | None:
        """How many of the arrivals in ``order`` the master consumes."""
        if self.kind is SchemeKind.BCC:
            return coverage_size(order, self.assignment, self.spec.n_groups)
        return self.threshold if len(order) >= self.threshold else None

    def decode(self, results: Sequence[WorkerResult], enforce_threshold: bool = True) -> DecodeOutcome:
        kind = self.kind
        if kind is SchemeKind.UNCODED:
            return uncoded_decode(results, self.spec, enforce_threshold)
        if kind is SchemeKind.REPETITION:
            return repetition_decode(results, self.spec, enforce_threshold)
        if kind is SchemeKind.GC:
            return gc_decode(results, self.spec, self.gc_design, enforce_threshold)
        if kind is SchemeKind.PCR:
            return pcr_decode(results, self.spec, enforce_threshold)
        return bcc_decode(results, self.assignment, self.spec.n_groups)

    def decode_multiplications(self, d: int, used: int | None = None) -> int:
        """Multiplication count the master spends decoding ``used`` results."""
        if self.kind is SchemeKind.PCR:
            k = self.threshold
            return d * (k * (k - 1) // 2 + self.spec.n_groups * (k - 1))
        if self.kind is SchemeKind.GC:
            return d * self.threshold
        return 0


def make_scheme(spec: SchemeSpec, **kwargs) -> Scheme:
    return Scheme(spec, **kwargs)
