"""Extended Kalman filter baseline in embedding coordinates.

The direction estimate lives in R^3 (not constrained to the sphere between
updates).  Each epoch applies the bearing update, a norm pseudo-measurement
that pulls the estimate back toward unit length, and an Euler prediction of
the linear time-varying dynamics.  Covariance updates use the Joseph form.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LostPositivity, SingularInnovationCovariance
from .lie import hat3

DEFAULT_R_VIRTUAL = 1e-4  # virtual variance of the norm pseudo-measurement


@dataclass(frozen=True)
class EkfState:
    eta_hat: np.ndarray
    P: np.ndarray
    t: float = 0.0


def ekf_predict(state, omega_measured, Q, dt):
    """Euler step of eta-dot = -omega x eta and its covariance flow."""
    F = -hat3(omega_measured)
    eta = state.eta_hat + dt * (F @ state.eta_hat)
    P = state.P + dt * (F @ state.P + state.P @ F.T + np.asarray(Q, dtype=float))
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise LostPositivity("prediction lost covariance positivity") from exc
    return EkfState(eta_hat=eta, P=P, t=state.t + dt)


def ekf_update_magnetometer(state, y_m, R_meas, cfg):
    """Bearing update with the tangential-projector output slope.

    The predicted output anchors at the normalized estimate; the Jacobian
    row space is the tangent plane, so the radial component of the estimate
    is untouched by this update (the norm constraint handles it).
    """
    eta = state.eta_hat
    nrm = float(np.linalg.norm(eta))
    yhat = cfg.c_m * eta / nrm
    H = cfg.c_m * (np.eye(3) - np.outer(eta, eta) / float(eta @ eta))
    P = state.P
    S = H @ P @ H.T + np.asarray(R_meas, dtype=float)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationCovariance(
            "bearing innovation covariance is singular (zero measurement "
            "gain with a rank-deficient Jacobian?)") from exc
    K = np.linalg.solve(S, H @ P).T  # P H^T S^{-1}
    eta_new = eta + K @ (np.asarray(y_m, dtype=float) - yhat)
    IKH = np.eye(3) - K @ H
    P_new = IKH @ P @ IKH.T + K @ np.asarray(R_meas, dtype=float) @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return EkfState(eta_hat=eta_new, P=P_new, t=state.t)


def ekf_update_constraint(state, r_virtual=DEFAULT_R_VIRTUAL):
    """Scalar pseudo-measurement driving the squared norm toward one."""
    eta = state.eta_hat
    P = state.P
    Hc = 2.0 * eta  # slope of the squared norm
    resid = 1.0 - float(eta @ eta)
    s = float(Hc @ P @ Hc) + float(r_virtual)
    K = (P @ Hc) / s
    eta_new = eta + K * resid
    IKH = np.eye(3) - np.outer(K, Hc)
    P_new = IKH @ P @ IKH.T + float(r_virtual) * np.outer(K, K)
    P_new = 0.5 * (P_new + P_new.T)
    return EkfState(eta_hat=eta_new, P=P_new, t=state.t)
