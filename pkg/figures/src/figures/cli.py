"""Command line entry point: `plot timeseries|linmap <csv> -o <png>`."""

import argparse
import sys

from . import PlotSpec, SchemaMismatch
from .render import plot_linmap, plot_timeseries


def build_parser():
    ap = argparse.ArgumentParser(
        prog="plot",
        description="Render benchmark figures from harness CSV files.")
    sub = ap.add_subparsers(dest="command")

    ts = sub.add_parser("timeseries",
                        help="angle error + Lyapunov value, stacked")
    ts.add_argument("csv", help="trial or aggregate CSV")
    ts.add_argument("-o", "--out", required=True, help="output image path")
    ts.add_argument("--linear-angle", action="store_true",
                    help="linear instead of log angle axis")
    ts.add_argument("--linear-lyapunov", action="store_true",
                    help="linear instead of log Lyapunov axis")
    ts.add_argument("--no-bands", action="store_true",
                    help="suppress 25-75%% percentile bands")
    ts.add_argument("--dpi", type=int, default=150)

    lm = sub.add_parser("linmap",
                        help="three-panel linearization-residual heatmap")
    lm.add_argument("csv", help="linmap CSV")
    lm.add_argument("-o", "--out", required=True, help="output image path")
    lm.add_argument("--dpi", type=int, default=150)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1

    spec = PlotSpec(
        out_path=args.out,
        input_path=args.csv,
        log_angle=not getattr(args, "linear_angle", False),
        log_lyapunov=not getattr(args, "linear_lyapunov", False),
        bands=not getattr(args, "no_bands", False),
        dpi=args.dpi,
    )
    try:
        if args.command == "timeseries":
            out = plot_timeseries(args.csv, spec)
        else:
            out = plot_linmap(args.csv, spec)
    except SchemaMismatch as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    print("wrote %s" % out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
