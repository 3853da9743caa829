#!/usr/bin/env python3
"""Output-linearization error map (heatmap figure data).

Evaluates each filter's output-model residual over a spherical grid of
true directions (observer at identity, predicted output anchored at the
reference direction) and writes the three-column error table.
"""

import argparse
import os

from eqfkit.sim import SimConfig, linearization_error_map, write_linmap_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="results/linmap.csv")
    ap.add_argument("--grid", type=int, default=50,
                    help="grid resolution per axis (default 50)")
    ap.add_argument("--cap", type=float, default=0.1,
                    help="excluded polar cap around the antipode, rad")
    args = ap.parse_args()

    tab = linearization_error_map(SimConfig(trials=1),
                                  grid=args.grid, cap=args.cap)

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    write_linmap_csv(args.out, tab)
    print("wrote %s (%d grid points)" % (args.out, tab.theta.size))
    print("max residual: ekf %.3f  eqf %.3f  eqfstar %.3f"
          % tuple(tab.errors.max(axis=0)))


if __name__ == "__main__":
    main()
