#!/usr/bin/env python3
"""Noiseless convergence run (time-series figure data).

Single trial with zero realized noise and a 0.3-rad initial offset, using
the stable gain configuration documented in the README: a 0.3-rad-std
prior keeps the explicit Riccati step well-conditioned, and a small gain
floor keeps the correction alive so the error decays exponentially.
"""

import argparse
import os

import numpy as np

from eqfkit.bearing import chart_inverse
from eqfkit.rng import TrialStream
from eqfkit.sim import (
    SimConfig,
    generate_trial,
    noiseless_protocol,
    run_trial,
    write_trial_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="results/noiseless_trial.csv")
    ap.add_argument("--offset", type=float, default=0.3,
                    help="initial angle offset in radians (default 0.3)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = noiseless_protocol(SimConfig(
        trials=1, seed=args.seed,
        Sigma0=0.09 * np.eye(2), M_eps=1e-2 * np.eye(2)))
    eta0 = chart_inverse(np.array([args.offset, 0.0]))
    data = generate_trial(cfg, TrialStream(cfg.seed, 0), initial_eta=eta0)
    rec = run_trial(cfg, data)

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    write_trial_csv(args.out, rec)
    print("wrote %s" % args.out)
    print("final angle error: ekf %.3e  eqf %.3e  eqfstar %.3e"
          % tuple(rec.angle[-1]))


if __name__ == "__main__":
    main()
