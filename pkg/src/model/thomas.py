"""Thomas breakthrough model with the contact-time K_T correlation.

Canonical internal units are grams, liters and hours. Inlet concentration is
configured in ppb (1 ppb = 1e-6 g/L); q_m given in kg/m^3 is numerically g/L.
Contact time enters the K_T correlation in minutes.
"""

import logging
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from ..errors import ConfigError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

PPB_TO_G_PER_L = 1e-6
MINUTES_PER_HOUR = 60.0
EXPONENT_CLAMP = 500.0

# Pump bounds correspond to contact times of 0.5 and 1.5 min.
DEFAULT_RESIN_VOLUME_L = 0.010583


@dataclass(frozen=True)
class ProcessParams:
    """Resin column constants, correlation coefficients and pump bounds."""

    resin_volume_l: float = DEFAULT_RESIN_VOLUME_L
    c0_ppb: float = 20.0
    qm_g_per_l: float = 0.254
    kt_alpha: float = -264.0  # L/(g hr) per minute of contact time
    kt_beta: float = 10.45  # L/(g hr) per ppb
    kt_gamma: float = 1247.0  # L/(g hr)
    q_min_lph: float = 0.42
    q_max_lph: float = 1.27
    column_height: float = 1.0  # diagnostics only (HETP)
    kt_multiplier: float = 1.0

    @property
    def c0_g_per_l(self) -> float:
        return self.c0_ppb * PPB_TO_G_PER_L

    def validate(self) -> List[str]:
        """Collect invariant violations as ``"process.<field>: ..."`` strings."""
        errors = []
        if not self.resin_volume_l > 0:
            errors.append("process.resin_volume_l: must be > 0")
        if not self.c0_ppb > 0:
            errors.append("process.c0_ppb: must be > 0")
        if not self.qm_g_per_l > 0:
            errors.append("process.qm_g_per_l: must be > 0")
        if not self.kt_multiplier > 0:
            errors.append("process.kt_multiplier: must be > 0")
        if not self.column_height > 0:
            errors.append("process.column_height: must be > 0")
        if not self.q_min_lph > 0:
            errors.append("process.q_min_lph: must be > 0")
        if self.q_min_lph > self.q_max_lph:
            errors.append(
                f"process.q_min_lph, process.q_max_lph: q_min ({self.q_min_lph}) "
                f"exceeds q_max ({self.q_max_lph})"
            )
        if errors:
            return errors

        # K_T is monotone in 1/Q, so the bounds are the extremes.
        for name, flow in (("q_min_lph", self.q_min_lph), ("q_max_lph", self.q_max_lph)):
            kt = _raw_kt(self, flow)
            if not kt > 0:
                errors.append(
                    f"process.{name}: K_T = {kt:.6g} L/(g hr) at Q = {flow} L/hr; "
                    "correlation is invalid in this regime"
                )
        return errors

    def check(self) -> "ProcessParams":
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self


@dataclass(frozen=True)
class OperatingPoint:
    """Model quantities at one (Q, t) pair."""

    flow_lph: float
    time_hr: float
    contact_time_min: float
    kt_value: float


def contact_time_min(params: ProcessParams, flow_lph: ArrayLike) -> ArrayLike:
    """Empty-bed contact time 60*V/Q in minutes."""
    return MINUTES_PER_HOUR * params.resin_volume_l / np.asarray(flow_lph, dtype=float)


def _raw_kt(params: ProcessParams, flow_lph: ArrayLike) -> ArrayLike:
    ct = contact_time_min(params, flow_lph)
    kt = params.kt_alpha * ct + params.kt_beta * params.c0_ppb + params.kt_gamma
    return params.kt_multiplier * kt


def kt_from_conditions(params: ProcessParams, flow_lph: ArrayLike) -> ArrayLike:
    """Thomas rate constant K_T = alpha*CT + beta*C0 + gamma in L/(g hr).

    Args:
        params: Process parameters
        flow_lph: Flow rate(s) in L/hr, must be positive

    Returns:
        K_T with the same shape as ``flow_lph``

    Raises:
        ConfigError: If the correlation yields K_T <= 0
    """
    flow = np.asarray(flow_lph, dtype=float)
    if np.any(flow <= 0):
        raise ConfigError([f"flow_lph: must be > 0, got min {float(np.min(flow))}"])
    kt = _raw_kt(params, flow)
    if np.any(kt <= 0):
        raise ConfigError(
            [f"kt_from_conditions: K_T <= 0 (min {float(np.min(kt)):.6g}); model invalid in this regime"]
        )
    return kt if kt.ndim else float(kt)


def kt_flow_derivative(params: ProcessParams, flow_lph: ArrayLike) -> ArrayLike:
    """dK_T/dQ = alpha * (-60*V/Q^2), scaled by the K_T multiplier."""
    flow = np.asarray(flow_lph, dtype=float)
    deriv = params.kt_multiplier * params.kt_alpha * (
        -MINUTES_PER_HOUR * params.resin_volume_l / flow**2
    )
    return deriv if deriv.ndim else float(deriv)


def half_time(params: ProcessParams, flow_lph: ArrayLike) -> ArrayLike:
    """Time at which psi = 1/2: q_m*V/(Q*C0) in hours."""
    return params.qm_g_per_l * params.resin_volume_l / (
        np.asarray(flow_lph, dtype=float) * params.c0_g_per_l
    )


def breakthrough_ratio(params: ProcessParams, flow_lph: ArrayLike, time_hr: ArrayLike) -> ArrayLike:
    """Effluent ratio psi = C/C0 from the Thomas model.

    The exponent K_T*q_m*V/Q - K_T*C0*t is clamped to +-500 so psi saturates
    inside (0, 1) instead of overflowing.
    """
    kt = kt_from_conditions(params, flow_lph)
    t = np.asarray(time_hr, dtype=float)
    exponent = kt * params.c0_g_per_l * (half_time(params, flow_lph) - t)
    exponent = np.clip(exponent, -EXPONENT_CLAMP, EXPONENT_CLAMP)
    psi = 1.0 / (1.0 + np.exp(exponent))
    return psi if np.ndim(psi) else float(psi)


def breakthrough_rate(params: ProcessParams, flow_lph: ArrayLike, time_hr: ArrayLike) -> ArrayLike:
    """dpsi/dt = K_T*C0*(psi - psi^2) in 1/hr."""
    psi = breakthrough_ratio(params, flow_lph, time_hr)
    kt = kt_from_conditions(params, flow_lph)
    return kt * params.c0_g_per_l * (psi - np.square(psi))


def time_to_ratio_constant(params: ProcessParams, flow_lph: float, ratio: float) -> float:
    """Closed-form inversion of the Thomas model at constant flow."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    rate = kt_from_conditions(params, flow_lph) * params.c0_g_per_l
    return float(half_time(params, flow_lph) + np.log(ratio / (1.0 - ratio)) / rate)


def operating_point(params: ProcessParams, flow_lph: float, time_hr: float) -> OperatingPoint:
    flow = float(np.clip(flow_lph, params.q_min_lph, params.q_max_lph))
    if flow != flow_lph:
        logger.debug(f"Flow {flow_lph} L/hr clipped to pump bounds -> {flow}")
    return OperatingPoint(
        flow_lph=flow,
        time_hr=float(time_hr),
        contact_time_min=float(contact_time_min(params, flow)),
        kt_value=float(kt_from_conditions(params, flow)),
    )
