"""Thomas breakthrough model, process parameters and flow schedules."""

from .schedule import ControlTrajectory
from .thomas import (
    OperatingPoint,
    ProcessParams,
    breakthrough_rate,
    breakthrough_ratio,
    contact_time_min,
    half_time,
    kt_flow_derivative,
    kt_from_conditions,
    operating_point,
    time_to_ratio_constant,
)

__all__ = [
    "ControlTrajectory",
    "OperatingPoint",
    "ProcessParams",
    "breakthrough_rate",
    "breakthrough_ratio",
    "contact_time_min",
    "half_time",
    "kt_flow_derivative",
    "kt_from_conditions",
    "operating_point",
    "time_to_ratio_constant",
]
