"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 runtime/network error (connection refused, port in use),
4 iteration timeout in the socket runner.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import gd as gdmod
from . import sim
from .config import ExperimentConfig, GdRunConfig, load_config
from .errors import NoFixedThresholdError
from .schemes import NodeConfig, Scheme, SchemeKind, SchemeSpec, recovery_threshold
from .tensor import partition
from .verifier import measure_threshold, optimality_gap, sub_threshold_certificates

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME, EXIT_TIMEOUT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _spec(kind: str, n: int, r: int, nodes: str | None = None, seed: int | None = None) -> SchemeSpec:
    kind = SchemeKind(kind)
    node_cfg = None
    if kind is SchemeKind.PCR and nodes and nodes != "chebyshev":
        node_cfg = getattr(NodeConfig, nodes)(n, r)
    if kind is SchemeKind.UNCODED:
        r = 1
    return SchemeSpec(kind, n, r, node_cfg, seed)


def _emit_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# -- threshold / bound ----------------------------------------------------


def cmd_threshold(args) -> int:
    spec = _spec(args.scheme, args.n, args.r, args.nodes)
    try:
        recovery_threshold(spec)
    except NoFixedThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    m = args.m or 2 * args.n
    report = measure_threshold(spec, m=m, d=args.d, seed=args.seed, tol=args.tol, samples=args.samples)
    print(f"{report.scheme} n={report.n} r={report.r}: measured K={report.measured_K} "
          f"predicted K={report.predicted_K} subsets={report.subsets_tested} "
          f"max_err={report.max_decode_error:.3e} worst_cond={report.worst_condition_number:.3e}")
    _emit_json(report.to_dict(), args.json)
    if not report.ok:
        print("error: measured threshold differs from the closed form", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_bound(args) -> int:
    spec = _spec(args.scheme, args.n, args.r, args.nodes)
    size = math.ceil(spec.n / spec.r) - 1
    m = args.m or spec.n
    certs = sub_threshold_certificates(spec, m, args.d)
    bad = [c for c in certs if c.decodable_possible]
    print(f"{spec.kind.value} n={spec.n} r={spec.r}: {len(certs)} subsets of size {size}, "
          f"required rank {args.d * m}, max stacked rank "
          f"{max((c.stacked_rank for c in certs), default=0)}, counterexamples {len(bad)}")
    summary = {"scheme": spec.kind.value, "n": spec.n, "r": spec.r, "subset_size": size,
               "subsets": len(certs), "counterexamples": [c.to_dict() for c in bad],
               "optimality_gap": optimality_gap(spec)}
    _emit_json(summary, args.json)
    return EXIT_VERIFY if bad else EXIT_OK


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    overrides = {"scenario": args.scenario, "m": args.m, "n": args.n, "d": args.d, "r": args.r,
                 "iterations": args.iterations, "out_dir": args.out,
                 "schemes": args.schemes.split(",") if args.schemes is not None else None,
                 "seeds": [int(s) for s in args.seeds.split(",")] if args.seeds else None,
                 "artificial": True if args.artificial else None}
    if args.schemes is not None and not args.schemes.strip():
        raise UsageError("empty scheme list")
    cfg = load_config(ExperimentConfig, args.config, overrides)
    specs = [_spec(name, cfg.n, cfg.r) for name in cfg.schemes]
    runs = sim.run_experiment(cfg.scenario_obj(), specs, cfg.iterations, cfg.seeds, cfg.cost.build())
    rows = sim.summary_rows(runs)
    print(f"{'scheme':<10} {'r':>3} {'threshold':>10} {'comm_s':>10} {'compute_s':>10} "
          f"{'decode_s':>10} {'total_s':>10}")
    for row in rows:
        print(f"{row['scheme']:<10} {row['r']:>3} {str(row['recovery_threshold']):>10} "
              f"{row['comm_s']:>10.3f} {row['compute_s']:>10.3f} {row['decode_s']:>10.4f} "
              f"{row['total_s']:>10.3f}")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sim.write_summary_csv(out / "summary.csv", rows)
        sim.write_traces_csv(out / "traces.csv", runs)
        for name, per_seed in runs.items():
            traces = [t for run in per_seed for t in run.traces]
            sim.write_cdf_csv(out / f"cdf_{name}.csv", sim.empirical_cdf(traces))
    return EXIT_OK


# -- gd / serve / work ------------------------------------------------------


def _gd_overrides(args) -> dict:
    return {k: getattr(args, k, None) for k in
            ("scheme", "m", "d", "n", "r", "iterations", "seed", "learning_rate", "momentum", "out",
             "host", "port", "timeout_s")} | {"spawn": True if getattr(args, "spawn", False) else None,
                                             "kill_at": getattr(args, "kill_at", None) or None}


def cmd_gd(args) -> int:
    cfg = load_config(GdRunConfig, args.config, _gd_overrides(args))
    data = gdmod.generate_dataset(cfg.m, cfg.d, cfg.seed)
    gcfg = gdmod.GdConfig(cfg.iterations, cfg.learning_rate, cfg.momentum)
    reference = gdmod.run_gd(data, gcfg)
    if args.centralized:
        traj = reference
    else:
        scheme = Scheme(_spec(cfg.scheme, cfg.n, cfg.r, seed=cfg.seed))
        traj = gdmod.run_gd(data, gcfg, sim.SimulatedExecutor(scheme, data.X, seed=cfg.seed))
    dev = gdmod.max_relative_deviation(traj, reference)
    print(f"{'centralized' if args.centralized else cfg.scheme} iterations={cfg.iterations} "
          f"final_loss={traj.losses[-1]:.6e} max_deviation={dev:.3e}")
    if cfg.out:
        gdmod.write_trajectory_csv(cfg.out, traj, reference)
    return EXIT_OK if dev <= 1e-6 else EXIT_VERIFY


def cmd_serve(args) -> int:
    from .net.runner import IterationTimeout, Master, RunnerConfig, reap, spawn_workers

    cfg = load_config(GdRunConfig, args.config, _gd_overrides(args))
    kills = {}
    for item in cfg.kill_at:
        it, _, wid = item.partition(":")
        kills.setdefault(int(it), []).append(int(wid))
    if kills and not cfg.spawn:
        raise UsageError("--kill-at needs --spawn")
    data = gdmod.generate_dataset(cfg.m, cfg.d, cfg.seed)
    gcfg = gdmod.GdConfig(cfg.iterations, cfg.learning_rate, cfg.momentum)
    spec = _spec(cfg.scheme, cfg.n, cfg.r, seed=cfg.seed)
    try:
        master = Master(RunnerConfig(cfg.n, spec, cfg.host, cfg.port, cfg.timeout_s))
    except OSError as exc:
        print(f"error: cannot listen on {cfg.host}:{cfg.port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"master listening on {cfg.host}:{master.port}", flush=True)
    procs = []

    def launch(port):
        if cfg.spawn:
            procs.extend(spawn_workers(cfg.n, port, cfg.host))

    def on_iteration(t):
        for wid in kills.get(t, ()):
            procs[wid].kill()
            procs[wid].wait()
            print(f"killed worker {wid} before iteration {t}", flush=True)

    try:
        traj = master.run(data, gcfg, on_iteration, launch)
    except gdmod.IterationFailed as exc:
        if isinstance(exc.cause, IterationTimeout):
            print(f"error: {exc.cause}", file=sys.stderr)
            return EXIT_TIMEOUT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, TimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        reap(procs)
    reference = gdmod.run_gd(data, gcfg)
    dev = gdmod.max_relative_deviation(traj, reference)
    print(f"{cfg.scheme} over sockets: iterations={cfg.iterations} final_loss={traj.losses[-1]:.6e} "
          f"max_deviation={dev:.3e}")
    if cfg.out:
        gdmod.write_trajectory_csv(cfg.out, traj, reference)
    return EXIT_OK if dev <= 1e-6 else EXIT_VERIFY


def cmd_work(args) -> int:
    from .net.runner import worker_loop

    delay = sim.StragglerModel.bernoulli(args.delay_p, args.delay_s, args.seed)
    try:
        worker_loop(args.host, args.port, args.worker_id, delay, args.connect_timeout)
    except (ConnectionError, OSError) as exc:
        print(f"worker {args.worker_id}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- encode -----------------------------------------------------------------


def cmd_encode(args) -> int:
    spec = _spec(args.scheme, args.n, args.r, args.nodes, args.seed)
    m = args.m or 2 * args.n
    if m % spec.n:
        raise UsageError(f"m={m} must be divisible by n={spec.n}")
    data = gdmod.generate_dataset(m, args.d, args.seed)
    scheme = Scheme(spec)
    shards = scheme.place(partition(data.X, spec.n))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"scheme": spec.kind.value, "n": spec.n, "r": spec.r, "m": m, "d": args.d, "workers": []}
    for s in shards:
        np.savez(out / f"worker_{s.worker_id}.npz", shards=s.shards, coeffs=s.coeffs,
                 combo=s.combo if s.combo is not None else np.ones(s.r))
        meta["workers"].append({"worker_id": s.worker_id, "coeffs": np.round(s.coeffs, 12).tolist(),
                                "stored_floats": s.stored_floats})
    if spec.nodes is not None:
        meta["alphas"] = list(spec.nodes.alphas)
        meta["betas"] = list(spec.nodes.betas)
    (out / "shards.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(shards)} shard sets to {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcrlab", description="Coded distributed gradient descent lab")
    sub = p.add_subparsers(dest="command", required=True)
    schemes = [k.value for k in SchemeKind]

    def scheme_args(sp, m_default=None):
        sp.add_argument("--scheme", choices=schemes, required=True)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--r", type=int, default=1)
        sp.add_argument("--m", type=int, default=m_default)
        sp.add_argument("--nodes", choices=["chebyshev", "integers", "systematic"], default="chebyshev")

    sp = sub.add_parser("threshold", help="measure a recovery threshold by subset enumeration")
    scheme_args(sp)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--samples", type=int, default=None, help="random subsets per k instead of all")
    sp.add_argument("--json", default=None, help="write the report here instead of stdout")
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("bound", help="rank-certify every sub-threshold subset")
    scheme_args(sp)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--json", default=None)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("simulate", help="simulate per-iteration run times under a straggler model")
    sp.add_argument("--config")
    sp.add_argument("--scenario", type=int, choices=[1, 2, 3, 4])
    sp.add_argument("--schemes", help="comma-separated scheme names")
    sp.add_argument("--seeds", help="comma-separated seeds")
    for name in ("m", "n", "d", "r", "iterations"):
        sp.add_argument(f"--{name}", type=int)
    sp.add_argument("--artificial", action="store_true")
    sp.add_argument("--out", help="directory for summary/traces/cdf CSV files")
    sp.set_defaults(func=cmd_simulate)

    def gd_args(sp):
        sp.add_argument("--config")
        sp.add_argument("--scheme", choices=schemes)
        for name in ("m", "d", "n", "r", "iterations", "seed"):
            sp.add_argument(f"--{name}", type=int)
        sp.add_argument("--learning-rate", dest="learning_rate", type=float)
        sp.add_argument("--momentum", type=float)
        sp.add_argument("--out", help="trajectory CSV path")

    sp = sub.add_parser("gd", help="GD with a simulated executor")
    gd_args(sp)
    sp.add_argument("--centralized", action="store_true")
    sp.set_defaults(func=cmd_gd)

    sp = sub.add_parser("serve", help="run the master of the socket runner")
    gd_args(sp)
    sp.add_argument("--host")
    sp.add_argument("--port", type=int)
    sp.add_argument("--timeout", dest="timeout_s", type=float)
    sp.add_argument("--spawn", action="store_true", help="launch local worker processes")
    sp.add_argument("--kill-at", dest="kill_at", action="append", metavar="ITER:WORKER",
                    help="kill a spawned worker just before an iteration")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("work", help="run one worker of the socket runner")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, required=True)
    sp.add_argument("--worker-id", dest="worker_id", type=int, required=True)
    sp.add_argument("--delay-p", dest="delay_p", type=float, default=0.0)
    sp.add_argument("--delay-s", dest="delay_s", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--connect-timeout", dest="connect_timeout", type=float, default=10.0)
    sp.set_defaults(func=cmd_work)

    sp = sub.add_parser("encode", help="dump each worker's stored shards")
    scheme_args(sp)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_encode)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ValidationError, ValueError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
