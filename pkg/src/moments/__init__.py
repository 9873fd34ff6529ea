"""Truncated temporal moments: quadrature oracle, moment ODEs, objectives."""

from .dynamics import (
    MOMENT_MODES,
    Y1_FLOOR,
    Y3_FLOOR,
    MomentState,
    MomentTrajectory,
    integrate_moments,
    moment_rhs,
)
from .metrics import (
    OBJECTIVE_WEIGHTS,
    hetp_tpn,
    objective_time,
    objective_trajectory,
    objective_value,
)
from .quadrature import (
    breakthrough_from_schedule,
    calibrate_truncation,
    moments_by_quadrature,
    moments_of_curve,
    variance_limit,
)

__all__ = [
    "MOMENT_MODES",
    "OBJECTIVE_WEIGHTS",
    "Y1_FLOOR",
    "Y3_FLOOR",
    "MomentState",
    "MomentTrajectory",
    "breakthrough_from_schedule",
    "calibrate_truncation",
    "hetp_tpn",
    "integrate_moments",
    "moment_rhs",
    "moments_by_quadrature",
    "moments_of_curve",
    "objective_time",
    "objective_trajectory",
    "objective_value",
    "variance_limit",
]
