"""CLI: render a figure from trace CSVs.

Each --trace may be a bare path (label = file stem) or ``label=path``.
The violin kind needs exactly two traces plus --aggregate for constraint
counts and the solved cross-check.
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_accuracy_curve, plot_solved_curve, plot_violin_cumulative
from .frames import TraceFormatError, load_aggregate, load_traces


def _trace_spec(arg: str):
    if "=" in arg:
        label, path = arg.split("=", 1)
        return label, path
    return None, arg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="Figures from solver trace CSVs.")
    parser.add_argument("--trace", action="append", required=True,
                        metavar="[LABEL=]FILE",
                        help="trace CSV; repeat for several configurations")
    parser.add_argument("--aggregate", default=None,
                        help="aggregate CSV (required for --kind violin)")
    parser.add_argument("--kind", required=True,
                        choices=["solved", "accuracy", "violin"])
    parser.add_argument("--steps", default="1,5,20",
                        help="comma-separated violin steps")
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        frames = load_traces([_trace_spec(t) for t in args.trace])
        if args.kind == "solved":
            plot_solved_curve(frames, args.out)
        elif args.kind == "accuracy":
            plot_accuracy_curve(frames, args.out)
        else:
            if not args.aggregate:
                raise TraceFormatError("--kind violin requires --aggregate")
            steps = [int(s) for s in args.steps.split(",") if s.strip()]
            aggregate = load_aggregate(args.aggregate)
            plot_violin_cumulative(frames, steps, args.out, aggregate)
    except (TraceFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
