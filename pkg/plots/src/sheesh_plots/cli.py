"""Command-line wrapper: sheesh-plot run1.csv run2.csv --out figure.svg"""

from __future__ import annotations

import argparse
import sys

from .render import PlotOptions, SchemaError, render


def build_parser():
    p = argparse.ArgumentParser(prog="sheesh-plot")
    p.add_argument("csvs", nargs="+", help="per-iteration run CSVs")
    p.add_argument("--out", required=True, help="output image (.svg or .png)")
    p.add_argument("--log-y", action="store_true", help="log-scale score axis")
    p.add_argument("--title", default=None)
    p.add_argument("--time-limit", type=float, default=500.0,
                   help="runs whose first iteration exceeds this get a '*'")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    opts = PlotOptions(title=args.title, log_y=args.log_y,
                       time_limit=args.time_limit)
    try:
        render(args.csvs, args.out, opts)
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
