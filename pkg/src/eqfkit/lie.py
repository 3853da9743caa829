"""SO(3) / so(3) / S^2 primitives.

Dense fixed-size numpy operations: hat/vee isomorphism, exponential and
principal logarithm with guarded small-angle and straight-angle branches,
adjoint action, and Frobenius-nearest re-projection onto the group.
"""

import numpy as np

from .errors import NonSkewInput, SingularInput

# series branch threshold for exp/log near the identity
SMALL_ANGLE = 1e-6

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat3(v):
    """Map a 3-vector to the skew matrix with hat3(v) @ w = cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vee3(S, tol=1e-8):
    """Inverse of hat3; reads the off-diagonal entries of a skew matrix."""
    S = np.asarray(S, dtype=float)
    if np.linalg.norm(S + S.T) > tol:
        raise NonSkewInput("matrix is not skew-symmetric: ||S + S^T|| = %g"
                           % np.linalg.norm(S + S.T))
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def exp_so3(w):
    """Rodrigues exponential so(3) coordinates -> rotation matrix."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w)
    W = hat3(w)
    if th < SMALL_ANGLE:
        # sin(th)/th and (1-cos th)/th^2 by series, accurate and finite at 0
        a = 1.0 - th * th / 6.0
        b = 0.5 - th * th / 24.0
    else:
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / (th * th)
    return np.eye(3) + a * W + b * (W @ W)


def log_so3(R):
    """Principal logarithm, ||result|| <= pi.

    Trace-based angle. Below SMALL_ANGLE a series in the skew part is used;
    within 1e-4 of pi the axis is recovered from the diagonal of (R + I)/2
    (largest diagonal element fixes the sign pattern, and the skew part
    disambiguates the overall sign when it is not negligible).
    """
    R = np.asarray(R, dtype=float)
    cos_th = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    th = np.arccos(cos_th)
    s = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])

    if th < SMALL_ANGLE:
        # log(R) ~ (R - R^T)/2 to third order
        return 0.5 * s

    if th > np.pi - 1e-4:
        # R ~ 2 a a^T - I at a straight angle; diagonal of B = (R+I)/2 = a a^T
        B = (R + np.eye(3)) / 2.0
        i = int(np.argmax(np.diag(B)))
        a = B[i] / np.sqrt(B[i, i])
        a = a / np.linalg.norm(a)
        if a @ s < 0.0:  # align with the skew part when it still has a sign
            a = -a
        return th * a

    return (th / (2.0 * np.sin(th))) * s


def adjoint(R, w):
    """Adjoint action of SO(3) on so(3) coordinates: Ad_R w = R w."""
    return np.asarray(R, dtype=float) @ np.asarray(w, dtype=float)


def project_so3(M):
    """Frobenius-nearest rotation to M (polar factor via SVD, sign-fixed)."""
    M = np.asarray(M, dtype=float)
    if np.linalg.det(M) <= 1e-12:
        raise SingularInput("cannot project a matrix with det <= 1e-12")
    U, _, Vt = np.linalg.svd(M)
    D = np.array([1.0, 1.0, np.linalg.det(U @ Vt)])
    return (U * D) @ Vt


def require_rotation(R, tol=1e-9):
    """Validate the rotation invariants; returns R unchanged."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3x3, got %r" % (R.shape,))
    if np.linalg.norm(R.T @ R - np.eye(3)) > tol:
        raise ValueError("matrix is not orthonormal within %g" % tol)
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1 within %g" % tol)
    return R


def require_unit(v, tol=1e-9):
    """Validate that v is a unit 3-vector; returns v unchanged."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError("expected a 3-vector, got shape %r" % (v.shape,))
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError("vector norm %g is not 1 within %g"
                         % (np.linalg.norm(v), tol))
    return v


def require_spd(M, tol=1e-9):
    """Validate symmetry and positive definiteness (via Cholesky)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix, got shape %r" % (M.shape,))
    if np.linalg.norm(M - M.T) > tol:
        raise ValueError("matrix is not symmetric within %g" % tol)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    return M


def normalize(v):
    """Unit vector along v."""
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
