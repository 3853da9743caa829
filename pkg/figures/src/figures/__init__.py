"""Figures for the bearing-filter benchmark, rendered from its CSV files.

This package consumes only the CSV files the simulation harness emits and
never imports the filter library.  Three schemas are recognized, matched
by exact header line:

- trial:     one row per step, per-filter angle error and Lyapunov value
- aggregate: one row per (step, filter) with 25/50/75 percentile columns
- linmap:    spherical grid of per-filter output-linearization residuals
"""

import csv
from dataclasses import dataclass, field

import numpy as np

TRIAL_HEADER = "t,ekf_angle,eqf_angle,eqfstar_angle,ekf_lyap,eqf_lyap,eqfstar_lyap"
AGGREGATE_HEADER = "t,filter,p25_angle,p50_angle,p75_angle,p25_lyap,p50_lyap,p75_lyap"
LINMAP_HEADER = "theta,phi,ekf_err,eqf_err,eqfstar_err"

FILTERS = ("ekf", "eqf", "eqfstar")


class SchemaMismatch(Exception):
    """CSV does not match any documented schema."""

    def __init__(self, path, header, detail="unrecognized header"):
        self.path = str(path)
        self.header = header
        super().__init__("%s: %s: %r" % (path, detail, header))


@dataclass(frozen=True)
class FilterStyle:
    color: str
    linestyle: str
    label: str


def default_styles():
    return {
        "eqfstar": FilterStyle("red", "-", "EqF*"),
        "eqf": FilterStyle("green", "-.", "EqF"),
        "ekf": FilterStyle("blue", "--", "EKF"),
    }


@dataclass(frozen=True)
class PlotSpec:
    """Rendering options shared by both plot kinds.

    `input_path` is informational (call sites pass the CSV explicitly);
    the log flags and bands only apply to time-series plots.
    """

    out_path: str
    input_path: str = ""
    log_angle: bool = True
    log_lyapunov: bool = True
    bands: bool = True
    styles: dict = field(default_factory=default_styles)
    dpi: int = 150


@dataclass(frozen=True)
class TimeSeries:
    kind: str      # "trial" or "aggregate"
    t: np.ndarray  # (K,)
    angle: dict    # filter -> (K,) for trial, (3, K) p25/p50/p75 for aggregate
    lyapunov: dict


@dataclass(frozen=True)
class LinmapGrid:
    theta: np.ndarray  # (n_theta,)
    phi: np.ndarray    # (n_phi,)
    errors: dict       # filter -> (n_theta, n_phi)


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaMismatch(path, "", detail=str(exc)) from exc
    if not rows:
        raise SchemaMismatch(path, "", detail="empty file")
    return ",".join(rows[0]), rows[1:]


def _numeric(path, header, rows, drop_col=None):
    try:
        if drop_col is None:
            return np.array([[float(v) for v in r] for r in rows])
        return np.array([[float(v) for i, v in enumerate(r) if i != drop_col]
                         for r in rows])
    except ValueError as exc:
        raise SchemaMismatch(path, header, detail="non-numeric cell") from exc


def load_timeseries(path):
    """Parse a trial or aggregate CSV; raises SchemaMismatch otherwise."""
    header, rows = _read_csv(path)
    if header == TRIAL_HEADER:
        if not rows:
            raise SchemaMismatch(path, header, detail="no data rows")
        data = _numeric(path, header, rows)
        angle = {f: data[:, 1 + i] for i, f in enumerate(FILTERS)}
        lyap = {f: data[:, 4 + i] for i, f in enumerate(FILTERS)}
        return TimeSeries("trial", data[:, 0], angle, lyap)
    if header == AGGREGATE_HEADER:
        if len(rows) % len(FILTERS) != 0 or not rows:
            raise SchemaMismatch(path, header, detail="ragged filter blocks")
        names = [r[1] for r in rows]
        if names != list(FILTERS) * (len(rows) // len(FILTERS)):
            raise SchemaMismatch(path, header, detail="filter column out of order")
        data = _numeric(path, header, rows, drop_col=1)
        angle, lyap = {}, {}
        for i, f in enumerate(FILTERS):
            block = data[i::len(FILTERS)]  # (K, 7): t,p25a,p50a,p75a,p25l,p50l,p75l
            angle[f] = block[:, 1:4].T
            lyap[f] = block[:, 4:7].T
        return TimeSeries("aggregate", data[::len(FILTERS), 0], angle, lyap)
    raise SchemaMismatch(path, header)


def load_linmap(path):
    """Parse a linmap CSV into per-filter grids; rows are theta-major."""
    header, rows = _read_csv(path)
    if header != LINMAP_HEADER:
        raise SchemaMismatch(path, header)
    if not rows:
        raise SchemaMismatch(path, header, detail="no data rows")
    data = _numeric(path, header, rows)
    n_phi = int(np.sum(data[:, 0] == data[0, 0]))
    if n_phi == 0 or len(rows) % n_phi != 0:
        raise SchemaMismatch(path, header, detail="irregular grid")
    n_theta = len(rows) // n_phi
    errors = {f: data[:, 2 + i].reshape(n_theta, n_phi)
              for i, f in enumerate(FILTERS)}
    return LinmapGrid(theta=data[::n_phi, 0], phi=data[:n_phi, 1],
                      errors=errors)
