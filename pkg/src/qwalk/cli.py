"""Command-line interface: ``qwalk run | sweep | compare``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError, IntegrationError, QuadratureError, ResourceBudgetError
from .runner import compare_runs, parse_values, run_experiment, sweep

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4


def _cmd_run(args):
    cfg = load_config(args.config)
    out = run_experiment(cfg, args.out)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_sweep(args):
    with open(args.config, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    values = parse_values(args.values)
    res = sweep(doc, args.param, values, args.out, args.jobs)
    for v in res.values:
        status = "FAILED " + res.failures[v] if v in res.failures else "ok"
        print(f"{args.param}={v}: {status}")
    print(f"combined: {res.combined}")
    return EXIT_FAIL if res.failures else EXIT_OK


def _cmd_compare(args):
    window = None
    if args.window:
        lo, hi = (float(x) for x in args.window.split(","))
        window = (lo, hi)
    rows = compare_runs(args.dir_a, args.dir_b, window)

    def f(x):
        return "-" if x is None else f"{x:.6g}"

    print(f"{'observable':<10} {'max_dev':>12} {'mean_dev':>12} {'ratio_mean':>12} "
          f"{'ratio_min':>12} {'ratio_max':>12} {'exp_a':>8} {'exp_b':>8}")
    worst = 0.0
    for r in rows:
        worst = max(worst, r.max_abs_dev)
        print(f"{r.name:<10} {f(r.max_abs_dev):>12} {f(r.mean_abs_dev):>12} {f(r.ratio_mean):>12} "
              f"{f(r.ratio_min):>12} {f(r.ratio_max):>12} {f(r.exponent_a):>8} {f(r.exponent_b):>8}")
    if args.tol is not None and worst > args.tol:
        print(f"max deviation {worst:.3g} exceeds tolerance {args.tol:g}")
        return EXIT_FAIL
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qwalk", description="Decohering quantum walk simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="run an experiment for several values of one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, help="dotted config path, e.g. decoherence.gamma")
    s.add_argument("--values", required=True, help="comma-separated numbers")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1, help="concurrent sub-runs")
    s.set_defaults(func=_cmd_sweep)

    c = sub.add_parser("compare", help="compare two run directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--tol", type=float)
    c.add_argument("--window", help="exponent-fit window 'lo,hi' (default: last 3/4 of the grid)")
    c.set_defaults(func=_cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceBudgetError as exc:
        print(f"resource budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (IntegrationError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
