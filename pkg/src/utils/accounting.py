"""Feed volume and chromate removal bookkeeping on a solver grid."""

import logging
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

logger = logging.getLogger(__name__)


def time_to_ratio(time_grid: np.ndarray, psi: np.ndarray, ratio: float) -> Optional[float]:
    """First time psi reaches ``ratio``, linearly interpolated between grid points.

    Returns:
        Time in hours, or None if psi stays below ``ratio`` on the grid
    """
    psi = np.asarray(psi, dtype=float)
    t = np.asarray(time_grid, dtype=float)
    above = np.flatnonzero(psi >= ratio)
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(t[0])
    frac = (ratio - psi[i - 1]) / (psi[i] - psi[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _integral_until(time_grid: np.ndarray, integrand: np.ndarray, until_hr: Optional[float]) -> float:
    t = np.asarray(time_grid, dtype=float)
    running = cumulative_trapezoid(integrand, t, initial=0.0)
    if until_hr is None:
        return float(running[-1])
    if until_hr > t[-1]:
        logger.warning(f"Accounting horizon {until_hr:.4g} hr beyond grid end {t[-1]:.4g} hr; truncated")
    return float(np.interp(until_hr, t, running))


def volume_processed(time_grid: np.ndarray, flow_lph: np.ndarray, until_hr: Optional[float] = None) -> float:
    """Feed volume integral of Q dt in liters."""
    return _integral_until(time_grid, np.asarray(flow_lph, dtype=float), until_hr)


def mass_removed_per_resin(
    time_grid: np.ndarray,
    psi: np.ndarray,
    flow_lph: np.ndarray,
    c0_g_per_l: float,
    resin_volume_l: float,
    until_hr: Optional[float] = None,
) -> float:
    """Chromate retained per liter of resin, integral of C0*(1 - psi)*Q dt / V in g/L."""
    integrand = c0_g_per_l * (1.0 - np.asarray(psi, dtype=float)) * np.asarray(flow_lph, dtype=float)
    return _integral_until(time_grid, integrand, until_hr) / resin_volume_l
