import csv

import numpy as np
import pytest

from oracles import prob_kth_arrival_delayed
from pcrlab.schemes import Scheme, SchemeSpec
from pcrlab.sim import (
    SCENARIOS,
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    CostModel,
    Scenario,
    StragglerModel,
    default_schemes,
    empirical_cdf,
    iteration_rngs,
    run_experiment,
    simulate,
    simulate_iteration,
    summary_rows,
    write_summary_csv,
    write_traces_csv,
)

QUIET = CostModel(message_jitter_s=0.0)


def test_no_delay_waits_for_first_k_by_id():
    scheme = Scheme(SchemeSpec("pcr", 10, 5))
    rng, _ = iteration_rngs(0)
    tr = simulate_iteration(scheme, StragglerModel.none(), QUIET, rng, 100, 20)
    assert tr.waited_for == (0, 1, 2)
    base = QUIET.per_multiplication_s * 2 * 5 * 20 * 100 / 10
    assert tr.total_s == pytest.approx(base + QUIET.per_message_s + tr.decode_s)
    assert tr.compute_s == pytest.approx(base)


def test_all_delayed_shifts_by_delay():
    scheme = Scheme(SchemeSpec("pcr", 40, 10))
    calm = simulate(scheme, StragglerModel.none(), QUIET, 5, 8000, 7000, seed=0)
    slow = simulate(scheme, StragglerModel.bernoulli(1.0, 0.5), QUIET, 5, 8000, 7000, seed=0)
    for a, b in zip(calm, slow):
        assert b.total_s - a.total_s == pytest.approx(0.5, abs=1e-12)


def test_deterministic_per_seed():
    scheme = Scheme(SchemeSpec("gc", 12, 3))
    model = StragglerModel.bernoulli(0.2, 0.3)
    a = simulate(scheme, model, CostModel(), 20, 120, 30, seed=4)
    b = simulate(scheme, model, CostModel(), 20, 120, 30, seed=4)
    assert [t.arrival.tobytes() for t in a] == [t.arrival.tobytes() for t in b]
    assert [t.total_s for t in a] == [t.total_s for t in b]


def test_time_conservation():
    scheme = Scheme(SchemeSpec("pcr", 40, 10))
    for tr in simulate(scheme, StragglerModel.bernoulli(0.05, 0.5), CostModel(), 50, 8000, 7000, seed=1):
        assert tr.compute_s + tr.comm_s + tr.decode_s == pytest.approx(tr.total_s, abs=1e-12)
        assert tr.comm_s >= 0 and tr.compute_s > 0
        assert tr.recovery_size == len(tr.waited_for) == 7


def test_smaller_threshold_never_slower():
    # Same arrivals, smaller K: the K-th order statistic can only move earlier.
    model = StragglerModel.bernoulli(0.1, 0.5)
    cost = CostModel(decode_per_multiplication_s=0.0)
    gc = simulate(SchemeSpec("gc", 40, 10), model, cost, 200, 8000, 7000, seed=2)
    pcr = simulate(SchemeSpec("pcr", 40, 10), model, cost, 200, 8000, 7000, seed=2)
    for a, b in zip(pcr, gc):
        assert a.total_s <= b.total_s + 1e-12


def test_more_delay_never_faster():
    scheme = Scheme(SchemeSpec("pcr", 20, 5))
    low = simulate(scheme, StragglerModel.bernoulli(0.2, 0.1), QUIET, 100, 200, 50, seed=3)
    high = simulate(scheme, StragglerModel.bernoulli(0.2, 0.4), QUIET, 100, 200, 50, seed=3)
    for a, b in zip(low, high):
        assert a.total_s <= b.total_s


def test_shifted_exponential_model():
    m = StragglerModel.shifted_exponential(0.1, 10.0)
    assert m.kind == "shifted_exponential"
    x = m.sample(np.random.default_rng(0), 10_000)
    assert x.min() >= 0.1 and x.mean() == pytest.approx(0.2, rel=0.05)
    with pytest.raises(ValueError):
        StragglerModel.bernoulli(1.5, 0.1)


@pytest.mark.parametrize("kind,K", [("uncoded", 40), ("gc", 31), ("pcr", 7)])
def test_binomial_order_statistic(kind, K):
    n, p, delay = 40, 0.05, 0.5
    scheme = Scheme(SchemeSpec(kind, n, 10))
    traces = simulate(scheme, StragglerModel.bernoulli(p, delay), QUIET, 100_000, 8000, 7000, seed=0)
    r = scheme.spec.r
    fixed = QUIET.per_multiplication_s * 2 * r * 7000 * 8000 / n + QUIET.per_message_s + traces[0].decode_s
    want = fixed + delay * prob_kth_arrival_delayed(n, K, p)
    got = np.mean([t.total_s for t in traces])
    assert got == pytest.approx(want, rel=0.01)


def test_scenarios_and_thresholds():
    assert SCENARIOS[2] == Scenario(8000, 40, True)
    assert SCENARIOS[4] == Scenario(6000, 30, True)
    runs = run_experiment(Scenario(800, 40, True, d=70), default_schemes(40), iterations=3)
    got = {name: r[0].recovery_threshold for name, r in runs.items()}
    assert got == {"uncoded": 40, "gc": 31, "pcr": 7, "bcc": None}
    runs = run_experiment(Scenario(600, 30, True, d=70), default_schemes(30), iterations=1)
    assert {k: len(v[0].traces) for k, v in runs.items()} == {"uncoded": 1, "gc": 1, "pcr": 1, "bcc": 1}
    assert runs["pcr"][0].recovery_threshold == 5 and runs["gc"][0].recovery_threshold == 21


def test_empty_scheme_list():
    with pytest.raises(ValueError):
        run_experiment(SCENARIOS[1], [], iterations=1)


def test_empirical_cdf():
    assert empirical_cdf([2.0]) == [(2.0, 1.0)]
    assert empirical_cdf([1.0, 1.0, 1.0]) == [(1.0, 1.0)]
    assert empirical_cdf([3.0, 1.0, 2.0, 2.0]) == [(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]
    with pytest.raises(ValueError):
        empirical_cdf([])


def test_csv_outputs(tmp_path):
    runs = run_experiment(Scenario(400, 20, True, d=50), default_schemes(20, 5), iterations=4, seeds=(0, 1))
    write_traces_csv(tmp_path / "t.csv", runs)
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 1 + 4 * 2 * 4
    write_summary_csv(tmp_path / "s.csv", summary_rows(runs))
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert tuple(rows[0]) == SUMMARY_COLUMNS
    assert [r[0] for r in rows[1:]] == ["uncoded", "gc", "pcr", "bcc"]
