"""Experiment harness: trajectory synthesis, noise injection, lockstep filter
execution, Monte Carlo aggregation, linearization-error maps, CSV emission.

Protocol defaults: Euler integration at dt = 0.01 s over T = 5 s, initial
direction drawn by perturbing E1 with an isotropic Gaussian (std 0.5),
gyro noise std 0.01 rad/s, bearing noise std 0.05, estimates initialized at
E1, 500 trials.  Noise draws are per-sample (not sqrt(dt)-scaled) and the
measured bearing is not renormalized.
"""

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import framework
from .bearing import BearingConfig, chart, make_bearing_system
from .ekf import (
    DEFAULT_R_VIRTUAL,
    EkfState,
    ekf_predict,
    ekf_update_constraint,
    ekf_update_magnetometer,
)
from .framework import EqFState, GainSchedule, OutputMode, lyapunov_value
from .lie import E1, hat3, normalize
from .rng import TrialStream

FILTERS = ("ekf", "eqf", "eqfstar")
PERCENTILES = (25.0, 50.0, 75.0)

TRIAL_HEADER = "t,ekf_angle,eqf_angle,eqfstar_angle,ekf_lyap,eqf_lyap,eqfstar_lyap"
AGGREGATE_HEADER = "t,filter,p25_angle,p50_angle,p75_angle,p25_lyap,p50_lyap,p75_lyap"
LINMAP_HEADER = "theta,phi,ekf_err,eqf_err,eqfstar_err"

# default filter noise model when the realized noise is switched off
NOMINAL_GYRO_STD = 0.01
NOMINAL_BEARING_STD = 0.05


@dataclass(frozen=True)
class SimConfig:
    """Experiment configuration.

    sigma_u / sigma_y scale the noise actually injected into the data;
    tune_sigma_u / tune_sigma_y are the noise intensities the filters assume
    (None: same as the injected values).  Sigma0 / M_eps / N_eps override
    the default gain matrices when given.
    """

    dt: float = 0.01
    T: float = 5.0
    trials: int = 500
    seed: int = 0
    sigma0: float = 0.5
    sigma_u: float = 0.01
    sigma_y: float = 0.05
    c_m: float = 1.0
    ekf_r_virtual: float = DEFAULT_R_VIRTUAL
    tune_sigma_u: Optional[float] = None
    tune_sigma_y: Optional[float] = None
    Sigma0: Optional[np.ndarray] = None
    M_eps: Optional[np.ndarray] = None
    N_eps: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("duration must be at least one step")
        if self.trials < 1:
            raise ValueError("at least one trial is required")
        for name in ("sigma0", "sigma_u", "sigma_y"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be nonnegative" % name)
        if not self.c_m > 0:
            raise ValueError("c_m must be positive")
        if not self.ekf_r_virtual > 0:
            raise ValueError("ekf_r_virtual must be positive")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def effective_tune_sigma_u(self):
        return self.sigma_u if self.tune_sigma_u is None else self.tune_sigma_u

    def effective_tune_sigma_y(self):
        return self.sigma_y if self.tune_sigma_y is None else self.tune_sigma_y

    def gain_schedule(self):
        Sigma0 = self.Sigma0 if self.Sigma0 is not None \
            else self.sigma0 ** 2 * np.eye(2)
        M_eps = self.M_eps if self.M_eps is not None else 1e-6 * np.eye(2)
        N_eps = self.N_eps if self.N_eps is not None else np.zeros((3, 3))
        return GainSchedule(
            Sigma0=np.asarray(Sigma0, dtype=float),
            M_eps=np.asarray(M_eps, dtype=float),
            N_eps=np.asarray(N_eps, dtype=float),
            M_input=self.effective_tune_sigma_u() ** 2 * np.eye(3),
            N_meas=self.effective_tune_sigma_y() ** 2 * np.eye(3),
        )


def noiseless_protocol(cfg):
    """Zero the injected noise but keep the filters on a nonzero noise model."""
    tu = cfg.effective_tune_sigma_u() or NOMINAL_GYRO_STD
    ty = cfg.effective_tune_sigma_y() or NOMINAL_BEARING_STD
    return dataclasses.replace(cfg, sigma_u=0.0, sigma_y=0.0,
                               tune_sigma_u=tu, tune_sigma_y=ty)


def reference_omega(t):
    """Reference angular velocity (0.1 cos 2t, 0.2 sin t, 0) rad/s."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (3,))
    out[..., 0] = 0.1 * np.cos(2.0 * t)
    out[..., 1] = 0.2 * np.sin(t)
    return out


@dataclass(frozen=True)
class TrialData:
    """True-state series plus the measured input/output series."""

    t: np.ndarray        # (K+1,)
    eta: np.ndarray      # (K+1, 3) true directions, unit rows
    omega_m: np.ndarray  # (K, 3) measured angular velocity at each epoch
    y_m: np.ndarray      # (K, 3) measured bearing at each epoch


def generate_trial(cfg, stream, initial_eta=None):
    """Synthesize one trial.

    Draw order (fixed for reproducibility): 3 normals for the initial
    perturbation (skipped when initial_eta is supplied), then K*3 for the
    gyro noise, then K*3 for the bearing noise.  The true state is Euler
    integrated and renormalized every step.
    """
    K = cfg.n_steps
    if initial_eta is None:
        eta0 = normalize(E1 + cfg.sigma0 * stream.normal(3))
    else:
        eta0 = normalize(np.asarray(initial_eta, dtype=float))
    t = np.arange(K + 1) * cfg.dt
    om_true = reference_omega(t[:K])
    eta = np.empty((K + 1, 3))
    eta[0] = eta0
    for k in range(K):
        step = eta[k] - cfg.dt * np.cross(om_true[k], eta[k])
        eta[k + 1] = step / np.linalg.norm(step)
    omega_m = om_true + cfg.sigma_u * stream.normal((K, 3))
    y_m = cfg.c_m * eta[:K] + cfg.sigma_y * stream.normal((K, 3))
    return TrialData(t=t, eta=eta, omega_m=omega_m, y_m=y_m)


@dataclass(frozen=True)
class TrialRecord:
    """Per-step metrics; columns ordered as FILTERS."""

    t: np.ndarray        # (K+1,)
    angle: np.ndarray    # (K+1, 3) radians
    lyapunov: np.ndarray  # (K+1, 3)


def _angle_between(a, b):
    d = float(a @ b) / (float(np.linalg.norm(a)) * float(np.linalg.norm(b)))
    return float(np.arccos(np.clip(d, -1.0, 1.0)))


def run_trial(cfg, data):
    """Run the three filters in lockstep on one trial's measurements."""
    bc = BearingConfig(c_m=cfg.c_m)
    sys = make_bearing_system(bc)
    gains = cfg.gain_schedule()
    Q = cfg.effective_tune_sigma_u() ** 2 * np.eye(3)
    # per-sample covariance equivalent to the continuous output intensity,
    # so the discrete update and the Riccati-driven correction assume the
    # same noise model
    R_meas = gains.composed_output_gain() / cfg.dt

    eqf = EqFState(Xhat=np.eye(3), Sigma=gains.Sigma0.copy(), t=0.0)
    eqs = EqFState(Xhat=np.eye(3), Sigma=gains.Sigma0.copy(), t=0.0)
    ekf = EkfState(eta_hat=E1.copy(), P=cfg.sigma0 ** 2 * np.eye(3), t=0.0)

    K = len(data.y_m)
    angle = np.empty((K + 1, 3))
    lyap = np.empty((K + 1, 3))

    def record(k):
        truth = data.eta[k]
        angle[k, 0] = _angle_between(ekf.eta_hat, truth)
        angle[k, 1] = _angle_between(eqf.Xhat[0], truth)
        angle[k, 2] = _angle_between(eqs.Xhat[0], truth)
        err = truth - ekf.eta_hat
        lyap[k, 0] = float(err @ np.linalg.solve(ekf.P, err))
        lyap[k, 1] = lyapunov_value(chart(eqf.Xhat @ truth), eqf.Sigma)
        lyap[k, 2] = lyapunov_value(chart(eqs.Xhat @ truth), eqs.Sigma)

    record(0)
    for k in range(K):
        om = data.omega_m[k]
        y = data.y_m[k]
        eqf = framework.eqf_step(sys, eqf, om, y, gains,
                                 OutputMode.STANDARD, cfg.dt)
        eqs = framework.eqf_step(sys, eqs, om, y, gains,
                                 OutputMode.EQUIVARIANT_STAR, cfg.dt)
        ekf = ekf_update_magnetometer(ekf, y, R_meas, bc)
        ekf = ekf_update_constraint(ekf, cfg.ekf_r_virtual)
        ekf = ekf_predict(ekf, om, Q, cfg.dt)
        record(k + 1)

    return TrialRecord(t=data.t, angle=angle, lyapunov=lyap)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class AggregateRecord:
    """Percentile summaries; axes (percentile, step, filter)."""

    t: np.ndarray
    angle: np.ndarray     # (3, K+1, 3)
    lyapunov: np.ndarray  # (3, K+1, 3)


@dataclass(frozen=True)
class MonteCarloResult:
    aggregate: AggregateRecord
    records: list
    failures: list


def _trial_worker(cfg, index):
    stream = TrialStream(cfg.seed, index)
    data = generate_trial(cfg, stream)
    return run_trial(cfg, data)


def _max_workers(trials):
    raw = os.environ.get("EQFKIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, min(n, trials))


def aggregate_records(t, records):
    angle = np.stack([r.angle for r in records])        # (trials, K+1, 3)
    lyap = np.stack([r.lyapunov for r in records])
    return AggregateRecord(
        t=t,
        angle=np.percentile(angle, PERCENTILES, axis=0),
        lyapunov=np.percentile(lyap, PERCENTILES, axis=0),
    )


def run_monte_carlo(cfg, out_dir=None):
    """Run cfg.trials independent trials and aggregate percentiles.

    Each trial owns the sub-stream keyed by seed XOR trial index.  Trials
    run in parallel when EQFKIT_THREADS (0 = auto) allows; aggregation is
    by trial index, so results do not depend on completion order.  Per-trial
    failures are collected, not fatal, unless no trial succeeds.
    """
    workers = _max_workers(cfg.trials)
    outcomes = {}
    failures = []

    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_trial_worker, cfg, i): i
                       for i in range(cfg.trials)}
            for fut in as_completed(futures):
                i = futures[fut]
                try:
                    outcomes[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported, not fatal
                    failures.append((i, "trial %d: %s" % (i, exc)))
    else:
        for i in range(cfg.trials):
            try:
                outcomes[i] = _trial_worker(cfg, i)
            except Exception as exc:  # noqa: BLE001
                failures.append((i, "trial %d: %s" % (i, exc)))

    if not outcomes:
        raise RuntimeError("all %d trials failed; first failure: %s"
                           % (cfg.trials, failures[0][1]))

    ordered = [outcomes[i] for i in sorted(outcomes)]
    failures.sort()
    agg = aggregate_records(ordered[0].t, ordered)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for i in sorted(outcomes):
            write_trial_csv(os.path.join(out_dir, "trial_%04d.csv" % i),
                            outcomes[i])
        write_aggregate_csv(os.path.join(out_dir, "aggregate.csv"), agg)

    return MonteCarloResult(aggregate=agg, records=ordered, failures=failures)


# ---------------------------------------------------------------------------
# linearization-error map


@dataclass(frozen=True)
class LinmapTable:
    theta: np.ndarray   # (P,) polar angle from E1
    phi: np.ndarray     # (P,) azimuth about E1
    errors: np.ndarray  # (P, 3) residual mismatch per filter (FILTERS order)


def linearization_error_map(cfg, grid=50, cap=0.1):
    """Residual-linearization mismatch over a spherical grid.

    At each direction eta (polar angle theta from E1, azimuth phi), with the
    observer at identity and the predicted output anchored at E1, compare the
    true output residual against each filter's linear model: the embedding
    Jacobian for the EKF, the standard output matrix for the EqF, and the
    averaged-anchor matrix for the EqF*.  The polar cap of radius `cap`
    around -E1 is excluded (chart boundary).
    """
    from .bearing import CHART_INJECTION

    thetas = np.linspace(0.0, np.pi - cap, grid)
    phis = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    yhat = cfg.c_m * E1
    H_ekf = cfg.c_m * (np.eye(3) - np.outer(E1, E1))
    C_eqf = hat3(yhat) @ CHART_INJECTION

    th_col = np.empty(grid * grid)
    ph_col = np.empty(grid * grid)
    errs = np.empty((grid * grid, 3))
    row = 0
    for th in thetas:
        ct, st = np.cos(th), np.sin(th)
        for ph in phis:
            eta = np.array([ct, st * np.cos(ph), st * np.sin(ph)])
            y = cfg.c_m * eta
            resid = y - yhat
            eps = chart(eta)
            C_star = 0.5 * (hat3(y) + hat3(yhat)) @ CHART_INJECTION
            th_col[row] = th
            ph_col[row] = ph
            errs[row, 0] = np.linalg.norm(resid - H_ekf @ (eta - E1))
            errs[row, 1] = np.linalg.norm(resid - C_eqf @ eps)
            errs[row, 2] = np.linalg.norm(resid - C_star @ eps)
            row += 1
    return LinmapTable(theta=th_col, phi=ph_col, errors=errs)


# ---------------------------------------------------------------------------
# CSV emission (full-precision decimal, fixed newline, deterministic)


def _fmt(x):
    return repr(float(x))


def write_trial_csv(path, record):
    with open(path, "w", newline="\n") as fh:
        fh.write(TRIAL_HEADER + "\n")
        for k in range(len(record.t)):
            row = [record.t[k],
                   record.angle[k, 0], record.angle[k, 1], record.angle[k, 2],
                   record.lyapunov[k, 0], record.lyapunov[k, 1],
                   record.lyapunov[k, 2]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_aggregate_csv(path, agg):
    with open(path, "w", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for k in range(len(agg.t)):
            for fi, name in enumerate(FILTERS):
                row = [_fmt(agg.t[k]), name]
                row += [_fmt(agg.angle[p, k, fi]) for p in range(3)]
                row += [_fmt(agg.lyapunov[p, k, fi]) for p in range(3)]
                fh.write(",".join(row) + "\n")


def write_linmap_csv(path, table):
    with open(path, "w", newline="\n") as fh:
        fh.write(LINMAP_HEADER + "\n")
        for k in range(len(table.theta)):
            row = [table.theta[k], table.phi[k],
                   table.errors[k, 0], table.errors[k, 1], table.errors[k, 2]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
