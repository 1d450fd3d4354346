"""Command line entry point.

    autosmote run --config experiment.toml
    autosmote compare runs/*/report.json
    autosmote make-toy --out toy.csv
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from . import engine
from .data import DataError
from .toy import ToyGeometry, make_toy

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


def _cmd_run(args) -> int:
    config = engine.ExperimentConfig.load(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    report = engine.run(config)
    print(json.dumps({k: report[k] for k in ("method", "mean_validation_score", "mean_test_score",
                                             "median_test_score", "path")}, indent=2))
    return EXIT_OK


def _cmd_compare(args) -> int:
    reports = [engine.load_report(p) for p in args.reports]
    try:
        table = engine.compare(reports, "mean_test_score" if args.score == "test" else "mean_validation_score")
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print(engine.format_rank_table(table))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "average_rank"])
            for method in table["methods"]:
                writer.writerow([method, table["average_rank"][method]])
    return EXIT_OK


def _cmd_make_toy(args) -> int:
    geometry = ToyGeometry(n_majority=args.n_majority, n_minority=args.n_minority)
    ds = make_toy(geometry, args.ir, args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x0", "x1", "label"])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(row[0])), repr(float(row[1])), ds.label_values[label]])
    print(f"wrote {ds.n_majority} majority and {ds.n_minority} minority rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autosmote", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True, help="TOML or JSON experiment config")
    p.add_argument("--output-dir", help=f"overrides the config (the {engine.OUTPUT_ENV} env var wins over both)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="average ranks across run reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--score", choices=("test", "validation"), default="test")
    p.add_argument("--out", help="also write the rank table as CSV")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("make-toy", help="write the two-cluster toy dataset as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--ir", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-majority", type=int, default=450)
    p.add_argument("--n-minority", type=int, default=35)
    p.set_defaults(func=_cmd_make_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except engine.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        logging.getLogger(__name__).exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
