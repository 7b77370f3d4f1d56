"""Command-line entry point: run experiments, render plots, probe ensembles."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ..errors import SchemaMismatch
from ..numkit import rand_orthonormal
from ..ripcheck import (
    csv_row,
    estimate_grip,
    estimate_rip,
    estimate_subisometry,
    estimate_uv_rip,
    write_reports_csv,
)
from ..validation import seed_sequence
from .config import SpecError, load_spec
from .scenarios import run_experiment, version_string

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _cmd_run(args) -> int:
    try:
        spec = load_spec(args.spec)
        summary = run_experiment(spec)
    except (SpecError, FileNotFoundError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"scenario: {summary['scenario']}")
    print(f"cells ok: {summary['cells_ok']}/{summary['cells_total']}")
    if summary["csv"]:
        print(f"csv: {summary['csv']}")
    print(f"manifest: {summary['manifest']}")
    for path in summary["plots"]:
        print(f"plot: {path}")
    if summary["cells_failed"]:
        print("failed cells:", file=sys.stderr)
        for failure in summary["cells_failed"]:
            print(f"  cell {failure['cell']}: {failure['error']}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .svgplot import render_plots

    try:
        paths = render_plots(args.csv, args.scenario)
    except (SchemaMismatch, FileNotFoundError) as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for path in paths:
        print(f"plot: {path}")
    return EXIT_OK


def _cmd_ripcheck(args) -> int:
    d, r, k = args.d, args.r, args.k
    rng = np.random.default_rng(seed_sequence(args.ensemble_seed))
    if args.estimator in ("rip", "uvrip"):
        ensemble = rng.standard_normal((args.samples, d, d))
    else:
        ensemble = rng.standard_normal((k, args.samples, d, d))

    if args.estimator == "rip":
        report = estimate_rip(ensemble, r, trials=args.trials, seed=args.seed)
        delta = report.delta_hat
    elif args.estimator == "grip":
        report = estimate_grip(ensemble, r, trials=args.trials, seed=args.seed)
        delta = report.delta_hat
    elif args.estimator == "uvrip":
        factor_seeds = seed_sequence(args.ensemble_seed + 1).spawn(2)
        u = rand_orthonormal(d, r, factor_seeds[0])
        v = rand_orthonormal(d, r, factor_seeds[1])
        report = estimate_uv_rip(u, v, ensemble, trials=args.trials, seed=args.seed)
        delta = report.delta_hat
    else:
        delta = estimate_subisometry(ensemble, r, trials=args.trials, seed=args.seed)

    row = csv_row(args.estimator, d, r, k if args.estimator in ("grip", "subiso") else 1,
                  args.samples, args.trials, delta, args.seed)
    if args.out:
        write_reports_csv(args.out, [row])
        print(f"report: {args.out}")
    else:
        print(",".join(str(row[c]) for c in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colora")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec")
    p_run.add_argument("--spec", required=True, help="path to a key=value spec file")
    p_run.set_defaults(func=_cmd_run)

    p_plot = sub.add_parser("plot", help="render the SVG plot for a results CSV")
    p_plot.add_argument("--csv", required=True)
    p_plot.add_argument("--scenario", required=True)
    p_plot.set_defaults(func=_cmd_plot)

    p_rip = sub.add_parser("ripcheck", help="run one isometry estimator on a fresh ensemble")
    p_rip.add_argument("--estimator", required=True,
                       choices=("rip", "grip", "uvrip", "subiso"))
    p_rip.add_argument("--d", type=int, required=True)
    p_rip.add_argument("--r", type=int, required=True)
    p_rip.add_argument("--k", type=int, default=1)
    p_rip.add_argument("--samples", type=int, required=True,
                       help="per-client sample count of the generated ensemble")
    p_rip.add_argument("--trials", type=int, default=256)
    p_rip.add_argument("--seed", type=int, default=0, help="trial-draw seed")
    p_rip.add_argument("--ensemble-seed", type=int, default=1,
                       help="seed for the generated Gaussian ensemble")
    p_rip.add_argument("--out", help="write the CSV report here instead of stdout")
    p_rip.set_defaults(func=_cmd_ripcheck)

    p_version = sub.add_parser("version", help="print the version string")
    p_version.set_defaults(func=lambda args: (print(version_string()), EXIT_OK)[1])

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
