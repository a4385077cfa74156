"""Seeded discrete-event model of one synchronous iteration per step.

Each worker's result reaches the master at::

    arrival = base compute (2 r m d / n multiplications) + straggler delay
              + message time (+ exponential network jitter)

The master stops at the scheme's completion point (K-th arrival, or BCC
coverage) and then spends the decode time. Straggler delays happen on the
worker and count as computation; message time and jitter count as
communication.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .schemes import Scheme, SchemeKind, SchemeSpec
from .tensor import partition


@dataclass(frozen=True)
class StragglerModel:
    """Per-worker, per-iteration i.i.d. delay: Bernoulli constant plus optional shifted exponential."""

    p: float = 0.0
    delay_s: float = 0.0
    shift_s: float = 0.0
    rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.delay_s < 0 or self.shift_s < 0:
            raise ValueError("delays must be non-negative")
        if self.rate is not None and self.rate <= 0:
            raise ValueError("rate must be positive")

    @classmethod
    def none(cls, seed: int = 0) -> "StragglerModel":
        return cls(seed=seed)

    @classmethod
    def bernoulli(cls, p: float, delay_s: float, seed: int = 0) -> "StragglerModel":
        return cls(p=p, delay_s=delay_s, seed=seed)

    @classmethod
    def shifted_exponential(cls, shift_s: float, rate: float, seed: int = 0) -> "StragglerModel":
        return cls(shift_s=shift_s, rate=rate, seed=seed)

    @property
    def kind(self) -> str:
        bern = self.p > 0 and self.delay_s > 0
        if bern and self.rate is not None:
            return "composite"
        if bern:
            return "bernoulli"
        if self.rate is not None:
            return "shifted_exponential"
        return "none"

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.zeros(n)
        if self.p > 0 and self.delay_s > 0:
            out += self.delay_s * (rng.random(n) < self.p)
        if self.rate is not None:
            out += self.shift_s + rng.exponential(1.0 / self.rate, n)
        return out


@dataclass(frozen=True)
class CostModel:
    """Maps operation counts to seconds.

    Defaults put a 40-worker, r=10, d=7000, m=8000 iteration at roughly
    0.02 s compute and 0.02-0.25 s communication, typical of a small cloud
    cluster. ``message_jitter_s`` is the mean of an exponential added
    to every message and stands in for naturally occurring stragglers.
    """

    per_multiplication_s: float = 6.7e-10
    per_message_s: float = 0.005
    decode_per_multiplication_s: float = 6.7e-10
    message_jitter_s: float = 0.055

    def __post_init__(self):
        if min(self.per_multiplication_s, self.per_message_s,
               self.decode_per_multiplication_s, self.message_jitter_s) < 0:
            raise ValueError("cost model entries must be non-negative")


@dataclass
class IterationTrace:
    iteration: int
    compute: np.ndarray  # per worker: base compute + straggler delay
    delay: np.ndarray  # per worker: straggler delay only
    arrival: np.ndarray  # per worker
    waited_for: tuple[int, ...]
    recovery_size: int
    decode_s: float
    compute_s: float
    comm_s: float
    total_s: float

    @property
    def per_worker(self) -> list[dict]:
        return [{"compute_s": float(c - dl), "delay_s": float(dl), "arrival_s": float(a)}
                for c, dl, a in zip(self.compute, self.delay, self.arrival)]


def _as_scheme(scheme) -> Scheme:
    return scheme if isinstance(scheme, Scheme) else Scheme(scheme)


def simulate_iteration(scheme: Scheme | SchemeSpec, model: StragglerModel, cost: CostModel,
                       rng: np.random.Generator, m: int, d: int, iteration: int = 0,
                       jitter_rng: np.random.Generator | None = None) -> IterationTrace:
    scheme = _as_scheme(scheme)
    n, r = scheme.spec.n, scheme.spec.r
    base = cost.per_multiplication_s * 2.0 * r * d * m / n
    delay = model.sample(rng, n)
    message = np.full(n, cost.per_message_s)
    if cost.message_jitter_s > 0:
        message += (jitter_rng or rng).exponential(cost.message_jitter_s, n)
    compute = base + delay
    arrival = compute + message
    order = np.argsort(arrival, kind="stable")  # ties broken by worker id
    size = scheme.completion_size(order.tolist())
    if size is None:
        raise RuntimeError("completion condition unreachable with all workers")
    waited = order[:size]
    decode_s = cost.decode_per_multiplication_s * scheme.decode_multiplications(d, size)
    t_arrive = float(arrival[waited].max())
    compute_s = float(compute[waited].max())
    total = t_arrive + decode_s
    return IterationTrace(iteration, compute, delay, arrival, tuple(int(j) for j in waited), int(size),
                          decode_s, compute_s, total - compute_s - decode_s, total)


def iteration_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent streams for straggler delays and network jitter."""
    return np.random.default_rng([seed, 0]), np.random.default_rng([seed, 1])


def simulate(scheme: Scheme | SchemeSpec, model: StragglerModel, cost: CostModel, iterations: int,
             m: int, d: int, seed: int | None = None) -> list[IterationTrace]:
    scheme = _as_scheme(scheme)
    rng, jrng = iteration_rngs(model.seed if seed is None else seed)
    return [simulate_iteration(scheme, model, cost, rng, m, d, t, jrng) for t in range(iterations)]


@dataclass(frozen=True)
class Scenario:
    m: int
    n: int
    artificial: bool
    d: int = 7000
    p: float = 0.05
    delay_s: float = 0.5

    def straggler_model(self, seed: int = 0) -> StragglerModel:
        if self.artificial:
            return StragglerModel.bernoulli(self.p, self.delay_s, seed)
        return StragglerModel.none(seed)


SCENARIOS = {
    1: Scenario(8000, 40, False),
    2: Scenario(8000, 40, True),
    3: Scenario(6000, 30, False),
    4: Scenario(6000, 30, True),
}


def default_schemes(n: int, r: int = 10) -> list[SchemeSpec]:
    return [SchemeSpec(SchemeKind.UNCODED, n), SchemeSpec(SchemeKind.GC, n, r),
            SchemeSpec(SchemeKind.PCR, n, r), SchemeSpec(SchemeKind.BCC, n, r)]


@dataclass
class SchemeRun:
    spec: SchemeSpec
    seed: int
    traces: list[IterationTrace] = field(default_factory=list)

    @property
    def total_s(self) -> float:
        return float(sum(t.total_s for t in self.traces))

    @property
    def comm_s(self) -> float:
        return float(sum(t.comm_s for t in self.traces))

    @property
    def compute_s(self) -> float:
        return float(sum(t.compute_s for t in self.traces))

    @property
    def decode_s(self) -> float:
        return float(sum(t.decode_s for t in self.traces))

    @property
    def recovery_threshold(self) -> int | None:
        return None if self.spec.kind is SchemeKind.BCC else self.traces[0].recovery_size

    def per_iteration(self) -> np.ndarray:
        return np.array([t.total_s for t in self.traces])


def run_experiment(scenario: Scenario, schemes: Sequence[SchemeSpec], iterations: int = 100,
                   seeds: Sequence[int] = (0,), cost: CostModel | None = None) -> dict[str, list[SchemeRun]]:
    """Simulate every scheme under every seed; keys are scheme kind names.

    All schemes see the same delay and jitter samples for a given seed, and
    the BCC placement is drawn from that seed too.
    """
    if not schemes:
        raise ValueError("no schemes given")
    cost = cost or CostModel()
    out: dict[str, list[SchemeRun]] = {}
    for spec in schemes:
        runs = []
        for seed in seeds:
            if spec.kind is SchemeKind.BCC:
                spec_s = SchemeSpec(spec.kind, spec.n, spec.r, seed=seed)
            else:
                spec_s = spec
            scheme = Scheme(spec_s)
            traces = simulate(scheme, scenario.straggler_model(seed), cost, iterations,
                              scenario.m, scenario.d, seed)
            runs.append(SchemeRun(spec_s, seed, traces))
        out[spec.kind.value] = runs
    return out


def empirical_cdf(traces: Sequence[IterationTrace] | Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous step points ``(t, P[T <= t])`` of the per-iteration totals."""
    if len(traces) == 0:
        raise ValueError("need at least one trace")
    times = np.sort([getattr(t, "total_s", t) for t in traces])
    N = len(times)
    out = []
    for i, t in enumerate(times):
        if i + 1 < N and times[i + 1] == t:
            continue
        out.append((float(t), (i + 1) / N))
    return out


TRACE_COLUMNS = ("iteration", "scheme", "seed", "recovery_size", "compute_s", "comm_s", "decode_s", "total_s")
SUMMARY_COLUMNS = ("scheme", "r", "recovery_threshold", "comm_s", "compute_s", "decode_s", "total_s")


def _f(x: float) -> str:
    return f"{x:.9f}"


def write_traces_csv(path, runs: dict[str, list[SchemeRun]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRACE_COLUMNS)
        for name, per_seed in runs.items():
            for run in per_seed:
                for t in run.traces:
                    out.writerow([t.iteration, name, run.seed, t.recovery_size, _f(t.compute_s),
                                  _f(t.comm_s), _f(t.decode_s), _f(t.total_s)])


def summary_rows(runs: dict[str, list[SchemeRun]]) -> list[dict]:
    """One row per scheme, run-time components averaged over seeds."""
    rows = []
    for name, per_seed in runs.items():
        k = len(per_seed)
        sizes = [t.recovery_size for run in per_seed for t in run.traces]
        thr = per_seed[0].recovery_threshold
        rows.append({
            "scheme": name,
            "r": per_seed[0].spec.r,
            "recovery_threshold": thr if thr is not None else f"avg {np.mean(sizes):.2f}",
            "comm_s": sum(run.comm_s for run in per_seed) / k,
            "compute_s": sum(run.compute_s for run in per_seed) / k,
            "decode_s": sum(run.decode_s for run in per_seed) / k,
            "total_s": sum(run.total_s for run in per_seed) / k,
        })
    return rows


def write_summary_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for row in rows:
            out.writerow([row["scheme"], row["r"], row["recovery_threshold"], _f(row["comm_s"]),
                          _f(row["compute_s"]), _f(row["decode_s"]), _f(row["total_s"])])


def write_cdf_csv(path, cdf: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("time_s", "fraction"))
        for t, frac in cdf:
            out.writerow([_f(t), repr(frac)])


class SimulatedExecutor:
    """GD executor: runs every worker's real computation, orders arrivals with the
    simulator, and decodes from the first results that satisfy the scheme."""

    def __init__(self, scheme: Scheme, X: np.ndarray, model: StragglerModel | None = None,
                 cost: CostModel | None = None, seed: int = 0):
        self.scheme = scheme
        self.shards = scheme.place(partition(X, scheme.spec.n))
        self.model = model or StragglerModel.none(seed)
        self.cost = cost or CostModel(message_jitter_s=0.0)
        self.m, self.d = X.shape
        self.rng, self.jrng = iteration_rngs(seed)
        self.t = 0

    def __call__(self, v: np.ndarray):
        trace = simulate_iteration(self.scheme, self.model, self.cost, self.rng, self.m, self.d,
                                   self.t, self.jrng)
        self.t += 1
        results = [self.scheme.compute(self.shards[j], v) for j in trace.waited_for]
        out = self.scheme.decode(results)
        return out.gradient_part, trace

