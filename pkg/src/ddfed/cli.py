"""Command-line entry points: run one experiment, run a comparison grid,
micro-benchmark the HE layer, and validate a config file.

Exit codes: 0 success, 1 config error, 2 runtime error.
"""

import argparse
import dataclasses
import json
import os
import statistics
import sys
import time

import numpy as np

from . import hecore
from .errors import DdfedError, ParameterError
from .harness import (
    apply_overrides,
    compare_grid,
    config_to_dict,
    load_config,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddfed",
        description="Federated-learning defense simulator with encrypted "
                    "similarity detection and secure aggregation",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to a JSON config")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE",
                     help="dotted-path config override, repeatable "
                          "(e.g. --set dp.epsilon=0.05)")

    cmp_ = sub.add_parser("compare", help="run a defense x attack grid")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--out", default="out")
    cmp_.add_argument("--set", dest="overrides", action="append", default=[],
                      metavar="KEY=VALUE")
    cmp_.add_argument("--defenses", default="fedavg,ddfed",
                      help="comma-separated defense kinds")
    cmp_.add_argument("--attacks", default="none,ipm,alie,scaling",
                      help="comma-separated attack kinds")
    cmp_.add_argument("--resume", action="store_true",
                      help="skip cells whose metrics file already exists")

    bench = sub.add_parser("bench-he", help="micro-benchmark the HE layer")
    bench.add_argument("--preset", default="desk", choices=["desk", "secure"])
    bench.add_argument("--dim", type=int, default=4096)
    bench.add_argument("--reps", type=int, default=5)
    bench.add_argument("--out", default="out")

    val = sub.add_parser("validate-config",
                         help="check a config against every invariant")
    val.add_argument("--config", required=True)
    val.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE")
    return parser


def _load_with_overrides(args):
    cfg = load_config(args.config)
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    seed_env = os.environ.get("DDFED_SEED")
    if seed_env is not None:
        cfg = dataclasses.replace(cfg, master_seed=int(seed_env))
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load_with_overrides(args)
        problems = cfg.validate()
        if problems:
            for p in problems:
                print(f"config error: {p}", file=sys.stderr)
            return 1
    except (ParameterError, FileNotFoundError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    try:
        metrics = run_experiment(cfg, out_csv=csv_path)
    except DdfedError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    manifest = {
        "config": config_to_dict(cfg),
        "metrics_path": "metrics.csv",
        "final_accuracy": metrics[-1].test_accuracy,
    }
    with open(os.path.join(args.out, "run.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"final_accuracy={metrics[-1].test_accuracy:.6f}")
    return 0


def cmd_compare(args) -> int:
    try:
        cfg = _load_with_overrides(args)
    except (ParameterError, FileNotFoundError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    defenses = [d for d in args.defenses.split(",") if d]
    attacks = [a for a in args.attacks.split(",") if a]
    try:
        manifest = compare_grid(cfg, defenses, attacks, args.out,
                                resume=args.resume)
    except DdfedError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    failures = [c for c in manifest["cells"] if c["status"] == "error"]
    for cell in manifest["cells"]:
        print(f"{cell['defense']} x {cell['attack']}: {cell['status']}")
    return 2 if len(failures) == len(manifest["cells"]) else 0


def cmd_bench_he(args) -> int:
    params = hecore.preset(args.preset)
    report = {"preset": args.preset, "dim": args.dim, "reps": args.reps,
              "ops": {}}
    rng = np.random.default_rng(0)
    for backend in ("mock", "ckks_lite"):
        keys = hecore.keygen(params, seed=1, backend=backend)
        v = rng.uniform(-1, 1, args.dim)
        v /= np.linalg.norm(v)
        w = rng.uniform(-1, 1, args.dim)
        w /= np.linalg.norm(w)
        cv = hecore.encrypt_vec(keys, v, rng)
        cw = hecore.encrypt_vec(keys, w, rng)
        timings = {"encrypt": [], "inner_product": [], "weighted_sum": []}
        for _ in range(args.reps):
            t0 = time.perf_counter()
            hecore.encrypt_vec(keys, v, rng)
            timings["encrypt"].append((time.perf_counter() - t0) * 1000)
            t0 = time.perf_counter()
            hecore.inner_product(cv, cw, keys)
            timings["inner_product"].append((time.perf_counter() - t0) * 1000)
            t0 = time.perf_counter()
            hecore.weighted_sum([cv, cw], [0.5, 0.5])
            timings["weighted_sum"].append((time.perf_counter() - t0) * 1000)
        report["ops"][backend] = {
            op: {
                "mean_ms": statistics.fmean(ts),
                "variance_ms2": statistics.pvariance(ts),
                "samples": len(ts),
            }
            for op, ts in timings.items()
        }
        print(f"[{backend}] " + "  ".join(
            f"{op}={statistics.fmean(ts):.2f}ms" for op, ts in timings.items()
        ))
    report["chunks"] = int(np.ceil(args.dim / params.slot_count))
    report["round_trip"] = _bench_round(params, args.dim, args.reps)
    print(
        "per-round: encrypted_path=%.1fms plaintext_path=%.1fms"
        % (report["round_trip"]["encrypted_path_ms"],
           report["round_trip"]["plaintext_path_ms"])
    )
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "bench_he.json")
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"report written to {out_path}")
    return 0


def _bench_round(params, dim, reps):
    """Per-round cost of the encrypted scoring+aggregation path vs a
    plaintext weighted mean over the same vectors (10 clients)."""
    rng = np.random.default_rng(1)
    m = 10
    vecs = [rng.uniform(-1, 1, dim) for _ in range(m)]
    vecs = [v / np.linalg.norm(v) for v in vecs]
    weights = np.full(m, 1.0 / m)

    t0 = time.perf_counter()
    for _ in range(reps):
        stacked = np.stack(vecs)
        ref = stacked.mean(axis=0)
        scores = stacked @ ref
        _ = weights @ stacked
    plain_ms = (time.perf_counter() - t0) / reps * 1000

    keys = hecore.keygen(params, seed=2, backend="ckks_lite")
    cvs = [hecore.encrypt_vec(keys, v, rng) for v in vecs]
    ref_cv = hecore.weighted_sum(cvs, weights)
    t0 = time.perf_counter()
    for _ in range(reps):
        g = hecore.mul_plain(ref_cv, 1.0)
        cts = [hecore.inner_product(cv, g, keys) for cv in cvs]
        hecore.pack_scalars(cts, keys)
        hecore.weighted_sum(cvs, weights)
    enc_ms = (time.perf_counter() - t0) / reps * 1000
    return {"plaintext_path_ms": plain_ms, "encrypted_path_ms": enc_ms,
            "clients": m}


def cmd_validate(args) -> int:
    try:
        cfg = _load_with_overrides(args)
    except (ParameterError, FileNotFoundError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    problems = cfg.validate()
    if problems:
        for p in problems:
            print(p)
        return 1
    print("config ok")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "compare": cmd_compare,
        "bench-he": cmd_bench_he,
        "validate-config": cmd_validate,
    }
    return handlers[args.verb](args)


if __name__ == "__main__":
    sys.exit(main())
