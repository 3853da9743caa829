"""Command-line entry point.

Subcommands: noiseless (single zero-noise trial), montecarlo (trial batch +
percentile aggregate), linmap (linearization-error grid), selftest
(structure/consistency checks).  Options may come from a TOML config file;
explicit command-line flags override file values.  Exit codes: 0 success,
1 invalid arguments, 2 runtime failure.
"""

import argparse
import os
import sys

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import framework, lie
from .bearing import BearingConfig, make_bearing_system
from .rng import TrialStream
from .sim import (
    SimConfig,
    generate_trial,
    linearization_error_map,
    noiseless_protocol,
    run_monte_carlo,
    run_trial,
    write_linmap_csv,
    write_trial_csv,
)


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage errors via exit code 1."""

    def error(self, message):
        raise _ArgumentError(message)


_CONFIG_KEYS = ("dt", "duration", "trials", "seed", "sigma0", "sigma_u",
                "sigma_y", "c_m", "out", "grid")


def _load_config_file(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise _ArgumentError("config file not found: %s" % path)
    except tomllib.TOMLDecodeError as exc:
        raise _ArgumentError("config file %s: %s" % (path, exc))
    values = {}
    for key, val in raw.items():
        norm = key.replace("-", "_")
        if norm not in _CONFIG_KEYS:
            raise _ArgumentError("unknown config key: %s" % key)
        values[norm] = val
    return values


def _build_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    out = values.pop("out", "results")
    grid = values.pop("grid", 50)
    if "duration" in values:
        values["T"] = values.pop("duration")
    try:
        cfg = SimConfig(**values)
    except (TypeError, ValueError) as exc:
        raise _ArgumentError(str(exc))
    if not isinstance(grid, int) or grid < 2:
        raise _ArgumentError("grid must be an integer >= 2")
    return cfg, str(out), grid


def _add_common_options(p):
    p.add_argument("--dt", type=float, help="integration step (s)")
    p.add_argument("--duration", type=float, help="trajectory length (s)")
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--sigma0", type=float,
                   help="initial-direction perturbation std")
    p.add_argument("--sigma-u", dest="sigma_u", type=float,
                   help="gyro noise std")
    p.add_argument("--sigma-y", dest="sigma_y", type=float,
                   help="bearing noise std")
    p.add_argument("--c-m", dest="c_m", type=float,
                   help="bearing output scale")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--config", help="TOML config file; flags override it")


def _cmd_noiseless(args):
    cfg, out, _ = _build_config(args)
    cfg = noiseless_protocol(cfg)
    stream = TrialStream(cfg.seed, 0)
    data = generate_trial(cfg, stream)
    record = run_trial(cfg, data)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "trial_0000.csv")
    write_trial_csv(path, record)
    final = record.angle[-1]
    print("noiseless trial: %d steps, dt=%g" % (cfg.n_steps, cfg.dt))
    print("final angle error (rad): ekf=%.3e eqf=%.3e eqfstar=%.3e"
          % (final[0], final[1], final[2]))
    print("wrote %s" % path)
    return 0


def _cmd_montecarlo(args):
    cfg, out, _ = _build_config(args)
    result = run_monte_carlo(cfg, out_dir=out)
    for _, message in result.failures:
        print("warning: %s" % message, file=sys.stderr)
    n_ok = len(result.records)
    med = result.aggregate.angle[1, -1]  # median, final step
    print("montecarlo: %d/%d trials ok, seed=%d" % (n_ok, cfg.trials, cfg.seed))
    print("final median angle (rad): ekf=%.3e eqf=%.3e eqfstar=%.3e"
          % (med[0], med[1], med[2]))
    print("wrote %s" % os.path.join(out, "aggregate.csv"))
    return 0


def _cmd_linmap(args):
    cfg, out, grid = _build_config(args)
    table = linearization_error_map(cfg, grid=grid)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "linmap.csv")
    write_linmap_csv(path, table)
    worst = table.errors.max(axis=0)
    print("linmap: %dx%d grid" % (grid, grid))
    print("max residual mismatch: ekf=%.3e eqf=%.3e eqfstar=%.3e"
          % (worst[0], worst[1], worst[2]))
    print("wrote %s" % path)
    return 0


def _selftest_checks():
    rng = TrialStream(seed=2024, index=0)
    checks = []

    # basic rotation-algebra identities
    w = rng.normal(3)
    checks.append(("hat_vee_roundtrip",
                   float(np.max(np.abs(lie.vee3(lie.hat3(w)) - w))), 1e-12))
    R = lie.exp_so3(rng.normal(3))
    checks.append(("exp_log_roundtrip",
                   float(np.max(np.abs(lie.exp_so3(lie.log_so3(R)) - R))),
                   1e-9))
    checks.append(("projection_fixes_rotation",
                   float(np.max(np.abs(lie.project_so3(R) - R))), 1e-12))

    bearing = make_bearing_system(BearingConfig())
    for res in framework.verify_description(bearing, rng=rng, samples=25):
        checks.append(("bearing_" + res.name.replace(" ", "_"),
                       res.max_err, res.tol))

    torsor = framework.make_so3_torsor_system()
    for res in framework.verify_description(torsor, rng=rng, samples=25):
        checks.append(("torsor_" + res.name.replace(" ", "_"),
                       res.max_err, res.tol))

    # the two state-matrix constructions must agree
    for name, sys_desc in (("bearing", bearing), ("torsor", torsor)):
        worst = 0.0
        for _ in range(20):
            Xhat = sys_desc.sample_group(rng)
            u = sys_desc.sample_input(rng)
            A1 = framework.state_matrix(sys_desc, Xhat, u, path="input-action")
            A2 = framework.state_matrix(sys_desc, Xhat, u, path="state-only")
            worst = max(worst, float(np.max(np.abs(A1 - A2))))
        checks.append(("%s_state_matrix_paths_agree" % name, worst, 1e-6))

    report = framework.iekf_specialization_check(torsor, rng=rng)
    if not report.applicable:
        checks.append(("torsor_exact_linearity_applicable", np.inf, 0.0))
    else:
        for trial, ratios in enumerate(report.ratios):
            for j, ratio in enumerate(ratios):
                checks.append((
                    "torsor_error_scaling_trial%d_dt%g" % (trial,
                                                           report.dt_values[j]),
                    abs(ratio - 2.0), 0.3))
        checks.append(("torsor_identity_fixed_point", report.identity_error,
                       1e-9))
    return checks


def _cmd_selftest(_args):
    checks = _selftest_checks()
    failed = 0
    for name, err, tol in checks:
        ok = err <= tol
        failed += not ok
        print("%s %s (err=%.3e, tol=%.1e)"
              % ("PASS" if ok else "FAIL", name, err, tol))
    print("selftest: %d/%d checks passed" % (len(checks) - failed, len(checks)))
    return 1 if failed else 0


def build_parser():
    parser = _Parser(prog="eqfkit",
                     description="bearing-estimation filter experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noiseless",
                       help="single trial with realized noise zeroed")
    _add_common_options(p)
    p.set_defaults(func=_cmd_noiseless)

    p = sub.add_parser("montecarlo", help="trial batch with aggregate")
    _add_common_options(p)
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("linmap", help="linearization-error grid")
    _add_common_options(p)
    p.add_argument("--grid", type=int, help="grid resolution per axis")
    p.set_defaults(func=_cmd_linmap)

    p = sub.add_parser("selftest", help="structure and consistency checks")
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _ArgumentError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - contract: nonzero, message, no trace
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
