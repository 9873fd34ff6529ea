"""Column-efficiency diagnostics and the extraction objective."""

import logging
from typing import Tuple

import numpy as np

from ..errors import InfeasibleObjective
from .dynamics import MomentState, MomentTrajectory

logger = logging.getLogger(__name__)

# Weights on sigma for the three tabulated objective times.
OBJECTIVE_WEIGHTS = (-1.0, -0.5, 0.5)


def hetp_tpn(t_m: float, variance: float, column_height: float) -> Tuple[float, float]:
    """Plate count TPN = t_m^2/sigma^2 and plate height HETP = L/TPN.

    Returns:
        Tuple of (hetp, tpn)
    """
    if not (t_m > 0 and variance > 0 and column_height > 0):
        raise ValueError(
            f"hetp_tpn needs positive inputs, got t_m={t_m}, variance={variance}, L={column_height}"
        )
    tpn = t_m**2 / variance
    return column_height / tpn, tpn


def objective_time(t_m: float, sigma: float, weight: float = -1.0) -> float:
    """Objective time t_m + weight*sigma in hours.

    Raises:
        InfeasibleObjective: If the result is negative
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    value = t_m + weight * sigma
    if value < 0:
        raise InfeasibleObjective(
            f"Objective time t_m {weight:+g}*sigma = {value:.4g} hr is negative "
            f"(t_m={t_m:.4g}, sigma={sigma:.4g})"
        )
    return value


def objective_value(state: MomentState, flow_lph: float, c0_g_per_l: float) -> float:
    """Extraction objective J = C0*(1 - y1)*Q*(y2 - sqrt(y3))."""
    return c0_g_per_l * (1.0 - state.y1_mu0) * flow_lph * (state.y2_mu1 - state.sigma)


def objective_trajectory(trajectory: MomentTrajectory, c0_g_per_l: float) -> np.ndarray:
    """J evaluated at every grid point with the local flow."""
    y = trajectory.states
    sigma = np.sqrt(np.clip(y[:, 2], 0.0, None))
    return c0_g_per_l * (1.0 - y[:, 0]) * trajectory.flow_lph * (y[:, 1] - sigma)
