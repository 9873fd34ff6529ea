"""Moment ODEs driven by the Thomas rate law, integrated by forward Euler.

State y = (mu0, mu1, mu2c, mu3c). With u = F1/y1 = K_T*C0*(1 - y1) and
d = t - y2 the vector field is

    F1 = K_T*C0*y1*(1 - y1)
    F2 = u*d
    F3 = u*(d^2 - y3)
    F4 = u*G

where G depends on the mode. ``exact`` differentiates the normalized third
central moment N3/(mu0*mu2c^1.5):

    G = d^3 y3^-1.5 - 3 d y3^-0.5 - y4 (1.5 d^2/y3 - 0.5)

``paper_faithful`` keeps the printed form, which uses (t - y1)^3 and drops
the chain term from the moving mean:

    G = (t - y1)^3 y3^-1.5 - y4 (1.5 d^2/y3 - 0.5)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError, NumericalAbort
from ..model.schedule import ControlTrajectory
from ..model.thomas import ProcessParams, kt_from_conditions

logger = logging.getLogger(__name__)

MOMENT_MODES = ("exact", "paper_faithful")

Y1_FLOOR = 1e-12
Y3_FLOOR = 1e-9  # hr^2
NEGATIVE_VARIANCE_TOL = -1e-9


@dataclass(frozen=True)
class MomentState:
    """Truncated temporal moments at one time point."""

    y1_mu0: float
    y2_mu1: float  # hr
    y3_mu2c: float  # hr^2
    y4_mu3c: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y1_mu0, self.y2_mu1, self.y3_mu2c, self.y4_mu3c])

    @classmethod
    def from_array(cls, values) -> "MomentState":
        y1, y2, y3, y4 = (float(v) for v in values)
        return cls(y1, y2, y3, y4)

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.y3_mu2c, 0.0))


@dataclass
class MomentTrajectory:
    """Moment states on a uniform grid together with the flow that drove them."""

    time_grid: np.ndarray
    states: np.ndarray  # (n_points, 4)
    flow_lph: np.ndarray
    mode: str = "exact"
    floor_events: Dict[str, int] = field(default_factory=dict)

    def state_at(self, index: int) -> MomentState:
        return MomentState.from_array(self.states[index])

    @property
    def final(self) -> MomentState:
        return self.state_at(-1)

    @property
    def psi(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def mu1(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def mu2c(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def mu3c(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def dt_hr(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0])

    def index_at(self, time_hr: float) -> int:
        """Grid index nearest to ``time_hr`` (clamped to the grid)."""
        index = int(round((time_hr - self.time_grid[0]) / self.dt_hr))
        return min(max(index, 0), self.time_grid.size - 1)


def check_mode(mode: str) -> str:
    if mode not in MOMENT_MODES:
        raise ConfigError([f"solver.moment_mode: expected one of {MOMENT_MODES}, got {mode!r}"])
    return mode


def _vector_field(
    y1: float,
    y2: float,
    y3: float,
    y4: float,
    t: float,
    kc0: float,
    exact: bool,
    events: Optional[Dict[str, int]],
) -> Tuple[float, float, float, float]:
    f1 = kc0 * y1 * (1.0 - y1)
    if y1 < Y1_FLOOR:
        if events is not None:
            events["y1_floor"] = events.get("y1_floor", 0) + 1
        u = f1 / Y1_FLOOR
    else:
        u = f1 / y1

    d = t - y2
    f2 = u * d
    f3 = u * (d * d - y3)

    if y3 <= Y3_FLOOR:
        if events is not None:
            events["y3_floor"] = events.get("y3_floor", 0) + 1
        return f1, f2, f3, 0.0

    inv_s = 1.0 / y3
    root_s = math.sqrt(y3)
    relax = y4 * (1.5 * d * d * inv_s - 0.5)
    if exact:
        g = d**3 * inv_s / root_s - 3.0 * d / root_s - relax
    else:
        g = (t - y1) ** 3 * inv_s / root_s - relax
    return f1, f2, f3, u * g


def moment_rhs(
    state: MomentState,
    time_hr: float,
    params: ProcessParams,
    flow_lph: float,
    mode: str = "exact",
    floor_events: Optional[Dict[str, int]] = None,
) -> MomentState:
    """Time derivative of the moment state.

    Args:
        state: Current moments
        time_hr: Current time in hours
        params: Process parameters
        flow_lph: Flow rate in L/hr
        mode: ``"exact"`` or ``"paper_faithful"``
        floor_events: Optional counter dict updated when a floor guards a division

    Returns:
        dy/dt packed as a MomentState
    """
    exact = check_mode(mode) == "exact"
    kc0 = kt_from_conditions(params, flow_lph) * params.c0_g_per_l
    rates = _vector_field(
        state.y1_mu0, state.y2_mu1, state.y3_mu2c, state.y4_mu3c, float(time_hr), kc0, exact, floor_events
    )
    return MomentState(*rates)


def integrate_moments(
    params: ProcessParams,
    control: ControlTrajectory,
    y1_init: float,
    mode: str = "exact",
    initial_state: Optional[MomentState] = None,
) -> MomentTrajectory:
    """Forward Euler integration of the moment ODEs along a flow schedule.

    Args:
        params: Process parameters
        control: Flow schedule on a uniform grid
        y1_init: Initial zeroth moment, psi(0) at the starting flow
        mode: Moment ODE variant
        initial_state: Full initial state; overrides ``[y1_init, 0, 0, 0]``
            when restarting part way along a grid

    Returns:
        MomentTrajectory on ``control.time_grid``

    Raises:
        NumericalAbort: On variance below -1e-9 or a non-finite state
    """
    exact = check_mode(mode) == "exact"
    start = initial_state if initial_state is not None else MomentState(float(y1_init), 0.0, 0.0, 0.0)

    kc0 = (np.asarray(kt_from_conditions(params, control.flow_lph)) * params.c0_g_per_l).tolist()
    times = control.time_grid.tolist()
    dt = control.dt_hr
    n_steps = control.n_steps

    states = np.empty((n_steps + 1, 4))
    states[0] = start.as_array()
    y1, y2, y3, y4 = start.y1_mu0, start.y2_mu1, start.y3_mu2c, start.y4_mu3c
    events: Dict[str, int] = {"y1_floor": 0, "y3_floor": 0}

    for n in range(n_steps):
        f1, f2, f3, f4 = _vector_field(y1, y2, y3, y4, times[n], kc0[n], exact, events)
        y1 += dt * f1
        y2 += dt * f2
        y3 += dt * f3
        y4 += dt * f4
        if y3 < NEGATIVE_VARIANCE_TOL:
            raise NumericalAbort(
                f"Negative variance y3 = {y3:.3e} at t = {times[n + 1]:.4g} hr",
                {"step": n + 1, "time_hr": times[n + 1], "state": [y1, y2, y3, y4]},
            )
        states[n + 1] = (y1, y2, y3, y4)

    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise NumericalAbort(
            f"Non-finite moment state at t = {times[bad]:.4g} hr",
            {"step": bad, "time_hr": times[bad], "mode": mode},
        )

    if events["y1_floor"]:
        logger.debug(f"y1 floor engaged {events['y1_floor']} times")
    return MomentTrajectory(
        time_grid=control.time_grid.copy(),
        states=states,
        flow_lph=control.flow_lph.copy(),
        mode=mode,
        floor_events=events,
    )
