"""Command line front end.

Four subcommands: tune prints a detection threshold, simulate runs a
scenario file and prints its summary, calibrate-af derives the switching
detector threshold from a calibration run, reproduce emits the canned
report cases.  Exit codes: 0 success, 2 configuration problems (bad
flags, unreadable or malformed scenario, unknown case), 3 numeric or
validation failures.
"""

import argparse
import sys

from . import harness
from .detection import tune_threshold
from .errors import ConfigError, NumericError


def _u64(text):
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from exc
    if value < 0 or value > 2**64 - 1:
        raise argparse.ArgumentTypeError("seed must fit an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="residlab",
        description="Simulate residual-based anomaly detectors under sensor attacks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tune = sub.add_parser(
        "tune", help="print the threshold for a design false-alarm rate",
    )
    p_tune.add_argument(
        "--false-alarm-rate", type=float, required=True, metavar="<f>",
        help="design false-alarm rate in (0, 1]",
    )
    p_tune.add_argument(
        "--sensors", type=int, required=True, metavar="<p>",
        help="number of sensors (chi-squared degrees of freedom)",
    )

    p_sim = sub.add_parser(
        "simulate", help="run a scenario file and print its summary",
    )
    p_sim.add_argument("--scenario", required=True, metavar="<path>")
    p_sim.add_argument(
        "--seed", type=_u64, default=None, metavar="<u64>",
        help="master seed; overrides the scenario's own seed field",
    )
    p_sim.add_argument(
        "--trace", default=None, metavar="<dir>",
        help="directory for the file outputs the scenario requests",
    )

    p_cal = sub.add_parser(
        "calibrate-af",
        help="run a switching-observer scenario and print the calibrated threshold",
    )
    p_cal.add_argument("--scenario", required=True, metavar="<path>")
    p_cal.add_argument(
        "--settle", type=float, required=True, metavar="<s>",
        help="settle window in seconds excluded from the calibration",
    )

    p_rep = sub.add_parser(
        "reproduce", help="run a canned reproduction case and write its data files",
    )
    p_rep.add_argument(
        "--case", required=True, metavar="<id>",
        help="one of: " + ", ".join(harness.REPRODUCE_CASES),
    )
    p_rep.add_argument("--out", required=True, metavar="<dir>")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "tune":
            print(repr(tune_threshold(args.false_alarm_rate, args.sensors)))
        elif args.command == "simulate":
            scenario = harness.load_scenario(args.scenario)
            report = harness.run_experiment(
                scenario, seed=args.seed, out_dir=args.trace,
            )
            for line in report.to_lines():
                print(line)
        elif args.command == "calibrate-af":
            scenario = harness.load_scenario(args.scenario)
            _, lines = harness.run_calibration(scenario, args.settle)
            for line in lines:
                print(line)
        elif args.command == "reproduce":
            for line in harness.reproduce(args.case, args.out):
                print(line)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
