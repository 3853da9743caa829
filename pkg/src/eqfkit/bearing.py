"""Single-bearing estimation on the sphere under the rotation group.

The state is a unit direction observed through a scaled bearing measurement,
rotating with a measured angular velocity.  The rotation group acts by
inverse rotation, the lift is the angular velocity itself, and the chart is
the normal (geodesic) chart about the first basis vector.  All filter
matrices have closed forms; the generic numeric route in
:mod:`eqfkit.framework` is kept as an independent cross-check.
"""

from dataclasses import dataclass

import numpy as np

from . import framework, lie
from .errors import AntipodeOutOfChart, NotTangent
from .lie import E1, hat3

# 3x2 injection of chart coordinates into embedding coordinates (the wedge
# map as a matrix: columns are the images of the chart basis)
CHART_INJECTION = np.array([
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
])

ANTIPODE_GUARD = 1e-6  # excluded polar cap around -E1, in radians


@dataclass(frozen=True)
class BearingConfig:
    """Output scale (field strength) of the bearing measurement."""

    c_m: float = 1.0

    def __post_init__(self):
        if not self.c_m > 0:
            raise ValueError("c_m must be positive, got %r" % (self.c_m,))


def dynamics(eta, omega):
    """eta-dot = -omega x eta; tangent to the sphere by construction."""
    return -np.cross(np.asarray(omega, dtype=float),
                     np.asarray(eta, dtype=float))


def output(eta, cfg):
    """Scaled bearing measurement c_m * eta."""
    return cfg.c_m * np.asarray(eta, dtype=float)


def phi(R, eta):
    """Right action of a rotation on the direction: R^T eta."""
    return np.asarray(R, dtype=float).T @ np.asarray(eta, dtype=float)


def psi(R, omega):
    """Right action on the angular-velocity input: R^T omega."""
    return np.asarray(R, dtype=float).T @ np.asarray(omega, dtype=float)


def lift(eta, omega):
    """Lift of the kinematics into so(3) coordinates: the input itself."""
    return np.asarray(omega, dtype=float)


def rho(R, y):
    """Right action on the output space: R^T y."""
    return np.asarray(R, dtype=float).T @ np.asarray(y, dtype=float)


def chart(e):
    """Normal coordinates about E1: signed geodesic offset, a 2-vector.

    Exactly zero at E1 itself; undefined within ANTIPODE_GUARD of -E1.
    """
    e = np.asarray(e, dtype=float)
    # E1 x e = (0, -e3, e2), spelled out (np.cross is slow on single vectors)
    c1, c2 = -e[2], e[1]
    s = float(np.hypot(c1, c2))
    th = float(np.arctan2(s, e[0]))
    if th > np.pi - ANTIPODE_GUARD:
        raise AntipodeOutOfChart(
            "point at angle %.9f rad from the chart origin is inside the "
            "excluded cap (guard pi - %g)" % (th, ANTIPODE_GUARD))
    if s == 0.0:
        return np.zeros(2)
    f = -th / s
    return np.array([f * c1, f * c2])


def chart_inverse(eps):
    """Inverse chart: act on E1 by the exponential of the wedged coordinates."""
    return lie.exp_so3(wedge2(eps)).T @ E1


def wedge2(v):
    """Embed chart coordinates into so(3) coordinates: (v1, v2) -> (0, v1, v2)."""
    v = np.asarray(v, dtype=float)
    return np.array([0.0, v[0], v[1]])


def dphi_origin_pinv(u, tol=1e-9):
    """Right inverse of the origin action differential.

    Takes a tangent vector at E1 (first component zero) to the chart-subspace
    coordinates (u3, -u2); wedging the result and flowing from E1 recovers u.
    """
    u = np.asarray(u, dtype=float)
    if abs(u[0]) > tol:
        raise NotTangent("vector has radial component %g at the origin"
                         % u[0])
    return np.array([u[2], -u[1]])


# D(chart_inverse) at 0: columns are the tangent directions of the chart axes
DCHART_INVERSE_ORIGIN = np.array([
    [0.0, 0.0],
    [0.0, -1.0],
    [1.0, 0.0],
])


def closed_form_matrices(Xhat, y, yhat, cfg=None):
    """Closed-form filter matrices (A, B, C, Cstar) at the observer state.

    A is zero (the lift does not depend on the state); B carries the input
    through the adjoint and the chart injection; C anchors the output slope
    at the predicted output; Cstar averages the measured and predicted
    anchors, which cancels the quadratic residual term.
    """
    R = np.asarray(Xhat, dtype=float)
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    A = np.zeros((2, 2))
    B = R[1:, :].copy()
    C = (hat3(yhat) @ R.T) @ CHART_INJECTION
    Cstar = (0.5 * (hat3(y) + hat3(yhat)) @ R.T) @ CHART_INJECTION
    return A, B, C, Cstar


def _sample_state(rng):
    """Unit vector no further than pi - 0.2 from E1 (inside the chart)."""
    while True:
        v = rng.normal(3)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            continue
        e = v / nrm
        if float(np.arctan2(np.linalg.norm(np.cross(E1, e)), e[0])) \
                <= np.pi - 0.2:
            return e


def _sample_group(rng):
    return lie.exp_so3(rng.normal(3))


def make_bearing_system(cfg=None):
    """Bundle the bearing system for the generic filter machinery."""
    if cfg is None:
        cfg = BearingConfig()

    def _output_matrix(Xhat):
        yhat = cfg.c_m * (np.asarray(Xhat, dtype=float).T @ E1)
        return closed_form_matrices(Xhat, yhat, yhat, cfg)[2]

    return framework.EquivariantSystemDescription(
        dims=(2, 3, 3, 3),
        group=framework.so3_group(),
        phi=phi,
        psi=psi,
        lift=lift,
        output=lambda eta: output(eta, cfg),
        rho=rho,
        origin=E1.copy(),
        chart=chart,
        chart_inverse=chart_inverse,
        wedge=wedge2,
        dphi_origin_pinv=lambda u: wedge2(dphi_origin_pinv(u)),
        dchart_inverse_origin=DCHART_INVERSE_ORIGIN,
        dynamics=dynamics,
        state_matrix_fn=lambda Xhat, u: np.zeros((2, 2)),
        input_matrix_fn=lambda Xhat, u: np.asarray(Xhat, dtype=float)[1:, :].copy(),
        output_matrix_fn=_output_matrix,
        output_matrix_star_fn=lambda Xhat, y, yhat:
            closed_form_matrices(Xhat, y, yhat, cfg)[3],
        sample_state=_sample_state,
        sample_input=lambda rng: rng.normal(3),
        sample_group=_sample_group,
    )
