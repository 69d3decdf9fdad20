"""Command line entry point: ``robsplit solve | rpp-experiment | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import fixtures, routeplan, splitter, verify
from .counterpart import LAMBDA_THRESHOLD
from .model import AssumptionError, load_problem

log = logging.getLogger("robsplit")

# keys accepted in a --config file, with their defaults
DEFAULTS = {
    "input": None,
    "fixture": None,
    "seed": 20190101,
    "max_cells": 10,
    "max_rounds": 50,
    "n": [10],
    "b": [3.0],
    "theta": [0.0, 0.5, 0.9],
    "instances": 100,
    "targets": [2, 10],
    "out": ".",
    "backend": None,
    "tol_active": splitter.TOL_ACTIVE,
    "lambda_threshold": LAMBDA_THRESHOLD,
    "dedup_tol": splitter.DEDUP_TOL,
    "inject": "",
}


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any option")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--backend", choices=["simplex", "highs"])
    common.add_argument("--max-cells", dest="max_cells", type=_positive_int)
    common.add_argument("--max-rounds", dest="max_rounds", type=int)
    common.add_argument("--tol-active", dest="tol_active", type=float)
    common.add_argument("--lambda-threshold", dest="lambda_threshold", type=float)
    common.add_argument("--dedup-tol", dest="dedup_tol", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="robsplit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="split-and-solve one problem file")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--input", help="problem file (JSON)")
    src.add_argument("--fixture", choices=sorted(fixtures.FIXTURES))

    e = sub.add_parser("rpp-experiment", parents=[common], help="route-planning benchmark")
    e.add_argument("--n", type=int, nargs="+")
    e.add_argument("--b", type=float, nargs="+")
    e.add_argument("--theta", type=float, nargs="+")
    e.add_argument("--instances", type=_positive_int)
    e.add_argument("--targets", type=_positive_int, nargs="+")

    v = sub.add_parser("verify", parents=[common], help="run the self-check batteries")
    v.add_argument("--inject", choices=verify.FAULTS, help="corrupt one ingredient on purpose")
    return ap


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in cfg and value is not None:
            cfg[key] = value
    return cfg


def cmd_solve(cfg) -> int:
    if cfg["fixture"]:
        problem = fixtures.FIXTURES[cfg["fixture"]]()
    elif cfg["input"]:
        problem = load_problem(cfg["input"])
    else:
        raise ValueError("solve needs --input or --fixture")
    trace = splitter.run(problem, max_cells=cfg["max_cells"], max_rounds=cfg["max_rounds"],
                         backend=cfg["backend"] or "simplex", tol_active=cfg["tol_active"],
                         threshold=cfg["lambda_threshold"], dedup_tol=cfg["dedup_tol"])
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "trace.jsonl")
    with open(path, "w") as fh:
        fh.write(trace.dumps())
    last = trace[-1]
    print(f"rounds: {len(trace)}  cells: {last.n_cells}  stop rule: {'yes' if last.stop else 'no'}")
    print(f"t_bar: {last.t_bar:.10g}")
    if last.t_under is not None:
        print(f"t_underbar: {last.t_under:.10g}")
    print(f"trace: {path}")
    return 0


def cmd_rpp_experiment(cfg) -> int:
    config = routeplan.RPPConfig(N=tuple(cfg["n"]), B=tuple(cfg["b"]), thetas=tuple(cfg["theta"]),
                                 instances=cfg["instances"], seed=cfg["seed"],
                                 targets=tuple(cfg["targets"]), backend=cfg["backend"] or "highs",
                                 max_rounds=cfg["max_rounds"])
    start = time.time()

    def progress(N, k, B, method, theta, trace):
        log.info("N=%d instance %d B=%g %s %s: %d cells, %.0fs", N, k, B, method, theta,
                 trace[-1].n_cells, time.time() - start)

    result = routeplan.run_experiment(config, progress)
    os.makedirs(cfg["out"], exist_ok=True)
    agg_fields = ["N", "B", "method", "theta", "target_cells", "instances", "mean_impr_pct",
                  "mean_impr_expost_pct", "p_value", "p_value_expost"]
    plot_fields = ["N", "B", "method", "theta", "cells", "mean_impr_pct", "mean_impr_expost_pct"]
    outputs = (("instances.csv", result.rows, routeplan.ROW_FIELDS),
               ("aggregate.csv", result.aggregate(), agg_fields),
               ("plot.csv", result.plot_data(), plot_fields))
    for name, rows, fields in outputs:
        with open(os.path.join(cfg["out"], name), "w", newline="") as fh:
            routeplan.write_csv(rows, fields, fh)
    for rec in result.aggregate():
        label = rec["method"] if rec["theta"] == "" else f"theta={rec['theta']:g}"
        print(f"N={rec['N']} B={rec['B']:g} |Z|={rec['target_cells']:<3d} {label:<11s} "
              f"impr {rec['mean_impr_pct']:6.3f}%  ex-post {rec['mean_impr_expost_pct']:6.3f}%")
    print(f"wrote {', '.join(n for n, _, _ in outputs)} to {cfg['out']}")
    return 0


def cmd_verify(cfg) -> int:
    results = verify.run_all(seed=cfg["seed"], inject=cfg["inject"] or "")
    for r in results:
        print(r.line())
        for f in r.failures[:5]:
            print(f"      {f}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"violated: {', '.join(failed)}")
        return 1
    return 0


COMMANDS = {"solve": cmd_solve, "rpp-experiment": cmd_rpp_experiment, "verify": cmd_verify}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except AssumptionError as exc:
        print(f"error: assumption violated ({exc.assumption}): {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
