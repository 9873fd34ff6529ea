"""Flow-rate schedules sampled on a uniform solver grid."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .thomas import ProcessParams


@dataclass
class ControlTrajectory:
    """Flow rate Q(t) in L/hr on a uniform time grid in hours."""

    time_grid: np.ndarray
    flow_lph: np.ndarray
    q_min_lph: float
    q_max_lph: float
    dt_hr: float = field(init=False)

    def __post_init__(self):
        self.time_grid = np.asarray(self.time_grid, dtype=float)
        self.flow_lph = np.asarray(self.flow_lph, dtype=float)
        if self.time_grid.ndim != 1 or self.time_grid.size < 2:
            raise ConfigError(["control.time_grid: need a 1-D grid with at least 2 points"])
        if self.flow_lph.shape != self.time_grid.shape:
            raise ConfigError(
                [f"control.flow_lph: shape {self.flow_lph.shape} != grid shape {self.time_grid.shape}"]
            )
        steps = np.diff(self.time_grid)
        self.dt_hr = float(steps[0])
        if self.dt_hr <= 0 or not np.allclose(steps, self.dt_hr, rtol=1e-9, atol=0.0):
            raise ConfigError(["control.time_grid: grid must be strictly increasing and uniform"])

    @classmethod
    def constant(
        cls, params: ProcessParams, flow_lph: float, t_final_hr: float, n_grid: int
    ) -> "ControlTrajectory":
        """Constant schedule on ``n_grid`` steps of t_final/n_grid hours."""
        grid = np.linspace(0.0, t_final_hr, n_grid + 1)
        flow = float(np.clip(flow_lph, params.q_min_lph, params.q_max_lph))
        return cls(grid, np.full_like(grid, flow), params.q_min_lph, params.q_max_lph)

    @classmethod
    def piecewise(
        cls, params: ProcessParams, breakpoints_hr, flows_lph, t_final_hr: float, n_grid: int
    ) -> "ControlTrajectory":
        """Piecewise-constant schedule; ``flows_lph[i]`` applies from ``breakpoints_hr[i]``."""
        grid = np.linspace(0.0, t_final_hr, n_grid + 1)
        index = np.searchsorted(np.asarray(breakpoints_hr, dtype=float), grid, side="right") - 1
        flow = np.asarray(flows_lph, dtype=float)[np.clip(index, 0, None)]
        return cls(
            grid,
            np.clip(flow, params.q_min_lph, params.q_max_lph),
            params.q_min_lph,
            params.q_max_lph,
        )

    def clipped(self, flow_lph: np.ndarray) -> "ControlTrajectory":
        """New schedule on the same grid with ``flow_lph`` clipped to the bounds."""
        return ControlTrajectory(
            self.time_grid.copy(),
            np.clip(flow_lph, self.q_min_lph, self.q_max_lph),
            self.q_min_lph,
            self.q_max_lph,
        )

    def tail(self, start_index: int) -> "ControlTrajectory":
        return ControlTrajectory(
            self.time_grid[start_index:].copy(),
            self.flow_lph[start_index:].copy(),
            self.q_min_lph,
            self.q_max_lph,
        )

    @property
    def n_steps(self) -> int:
        return self.time_grid.size - 1
