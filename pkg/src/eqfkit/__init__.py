"""Equivariant filtering on homogeneous spaces, instantiated for
single-bearing direction estimation, with an embedded-coordinates EKF
baseline and a Monte Carlo experiment harness."""

from .bearing import BearingConfig, make_bearing_system
from .ekf import EkfState, ekf_predict, ekf_update_constraint, ekf_update_magnetometer
from .framework import (
    EqFState,
    EquivariantSystemDescription,
    GainSchedule,
    MatrixLieGroup,
    OutputMode,
    correction,
    eqf_step,
    iekf_specialization_check,
    input_matrix,
    lyapunov_value,
    make_so3_torsor_system,
    numeric_jacobian,
    output_matrix_equivariant,
    output_matrix_standard,
    riccati_step,
    so3_group,
    state_matrix,
    verify_description,
)
from .rng import TrialStream
from .sim import (
    SimConfig,
    generate_trial,
    linearization_error_map,
    noiseless_protocol,
    reference_omega,
    run_monte_carlo,
    run_trial,
)

__version__ = "0.1.0"

__all__ = [
    "BearingConfig",
    "EkfState",
    "EqFState",
    "EquivariantSystemDescription",
    "GainSchedule",
    "MatrixLieGroup",
    "OutputMode",
    "SimConfig",
    "TrialStream",
    "correction",
    "ekf_predict",
    "ekf_update_constraint",
    "ekf_update_magnetometer",
    "eqf_step",
    "generate_trial",
    "iekf_specialization_check",
    "input_matrix",
    "linearization_error_map",
    "lyapunov_value",
    "make_bearing_system",
    "make_so3_torsor_system",
    "noiseless_protocol",
    "numeric_jacobian",
    "output_matrix_equivariant",
    "output_matrix_standard",
    "reference_omega",
    "riccati_step",
    "run_monte_carlo",
    "run_trial",
    "so3_group",
    "state_matrix",
    "verify_description",
]
