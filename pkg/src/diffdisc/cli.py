"""Command-line interface.

Exit codes: 0 success, 2 bad flags, 3 data or validation error,
4 estimation error. Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__
from .binscatter import binned_series
from .estimators import (EstimatorConfig, estimate_diff_disc_fd, estimate_diff_disc_pooled,
                         estimate_sharp_rd)
from .exceptions import DataError, DiffDiscError, EstimationError, HarnessError
from .local_regression import CrossValidation, FixedBandwidth, KernelKind
from .panel import (ColumnMapping, first_difference, load_panel, period_slice,
                    require_valid, write_panel)
from .simulate import DgpSpec, format_spec, generate_panel, load_spec, run_monte_carlo

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 2, 3, 4

MC_ESTIMATORS = {"rd": "naive_rd_post", "diff-disc-fd": "diff_disc_fd",
                 "diff-disc-pooled": "diff_disc_pooled"}


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or value == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive number: {text!r}")
    return value


def _bandwidth(text):
    if text == "auto":
        return text
    return _positive_float(text)


def _int_at_least(minimum):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}: {text!r}")
        return value
    return parse


def _level(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text!r}")
    return value


def _add_columns(p):
    p.add_argument("--col-unit", default="unit_id", help="unit id column (default: unit_id)")
    p.add_argument("--col-period", default="period", help="period column (default: period)")
    p.add_argument("--col-outcome", default="outcome", help="outcome column (default: outcome)")
    p.add_argument("--col-distance", default="distance",
                   help="signed distance column, positive = treated (default: distance)")


def _add_estimator_flags(p):
    p.add_argument("--estimator", choices=sorted(MC_ESTIMATORS), default="diff-disc-fd")
    p.add_argument("--kernel", choices=[k.value for k in KernelKind], default="triangular")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto",
                   help="positive number, or 'auto' for leave-one-out cross-validation over "
                        "12 geometrically spaced bandwidths from range/50 to range/2 of the "
                        "distances (default: auto)")
    p.add_argument("--order", type=_int_at_least(1), default=1,
                   help="local polynomial order (default: 1)")
    p.add_argument("--level", type=_level, default=0.95,
                   help="confidence level (default: 0.95)")
    p.add_argument("--output", choices=["text", "json-lines"], default="text")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="diffdisc",
        description="Geographic regression discontinuity and difference-in-discontinuities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate on a CSV panel")
    p.add_argument("--input", required=True, help="CSV file, or '-' for stdin")
    _add_estimator_flags(p)
    p.add_argument("--period", type=int, choices=[0, 1], default=1,
                   help="period used by --estimator rd (default: 1)")
    p.add_argument("--repeated-cross-section", action="store_true",
                   help="diff-disc-pooled only: unit ids need not match across periods")
    _add_columns(p)

    p = sub.add_parser("simulate", help="Monte Carlo study on synthetic panels")
    p.add_argument("--spec", help="DGP key-value file (default: built-in default spec)")
    p.add_argument("--reps", type=_int_at_least(1), default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_int_at_least(1), default=1,
                   help="worker processes; output does not depend on this")
    _add_estimator_flags(p)

    p = sub.add_parser("generate", help="write one synthetic panel as CSV")
    p.add_argument("--spec", help="DGP key-value file (default: built-in default spec)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--print-spec", action="store_true",
                   help="print the resolved spec instead of data")

    p = sub.add_parser("binscatter", help="binned means per side of the cutoff, as CSV")
    p.add_argument("--input", required=True, help="CSV file, or '-' for stdin")
    p.add_argument("--bins", type=_int_at_least(2), default=20, help="bins per side")
    p.add_argument("--series", choices=["period0", "period1", "fd", "all"], default="all")
    _add_columns(p)
    return parser


def _config(args):
    bw = CrossValidation() if args.bandwidth == "auto" else FixedBandwidth(args.bandwidth)
    return EstimatorConfig(kernel=KernelKind(args.kernel), bandwidth=bw, order=args.order,
                           confidence_level=args.level)


def _load(args):
    schema = ColumnMapping(args.col_unit, args.col_period, args.col_outcome, args.col_distance)
    if args.input == "-":
        return load_panel(sys.stdin, schema, name="<stdin>")
    try:
        return load_panel(args.input, schema)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror}") from None


def _spec(args):
    if args.spec:
        try:
            return load_spec(args.spec)
        except OSError as exc:
            raise DataError(f"cannot read {args.spec}: {exc.strerror}") from None
    return DgpSpec()


def _emit(record, fmt, out):
    if fmt == "json-lines":
        out.write(json.dumps(record) + "\n")
    else:
        for key, value in record.items():
            out.write(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n")


def cmd_estimate(args, out):
    data = _load(args)
    config = _config(args)
    if args.estimator == "rd":
        est = estimate_sharp_rd(period_slice(data, args.period), config)
    elif args.estimator == "diff-disc-fd":
        est = estimate_diff_disc_fd(data, config)
    else:
        est, _ = estimate_diff_disc_pooled(data, config,
                                           repeated_cross_section=args.repeated_cross_section)
    _emit(est.to_record(), args.output, out)


def cmd_simulate(args, out):
    summary = run_monte_carlo(_spec(args), MC_ESTIMATORS[args.estimator], _config(args),
                              args.reps, args.seed, workers=args.workers)
    _emit(summary.to_record(), args.output, out)


def cmd_generate(args, out):
    spec = _spec(args)
    if args.print_spec:
        out.write(format_spec(spec))
    else:
        write_panel(generate_panel(spec, args.seed), out)


def cmd_binscatter(args, out):
    data = _load(args)
    # an empty side is an estimation-class failure here, raised by binned_series
    require_valid(data, ignore=("empty_side",))
    series = {
        "period0": lambda: binned_series(period_slice(data, 0), args.bins, "period0"),
        "period1": lambda: binned_series(period_slice(data, 1), args.bins, "period1"),
        "fd": lambda: binned_series(first_difference(data), args.bins, "first_difference"),
    }
    wanted = ["period0", "period1", "fd"] if args.series == "all" else [args.series]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["series", "side", "bin_center", "mean_value", "count"])
    for name in wanted:
        for label, side, center, mean, count in series[name]().rows():
            writer.writerow([label, side, repr(center), repr(mean), count])


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate,
            "generate": cmd_generate, "binscatter": cmd_binscatter}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        COMMANDS[args.command](args, out)
    except DataError as exc:
        print(f"diffdisc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, HarnessError) as exc:
        print(f"diffdisc: estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DiffDiscError as exc:
        print(f"diffdisc: error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def entry_point():
    sys.exit(main())
