"""Forward-backward sweep optimizer for the flow-rate schedule.

Each iteration integrates the moments forward under the current schedule,
sweeps the sensitivities and costates, and nudges Q(t) along dH/dQ(t):

    Q <- clip(Q + gain * f(t) * sign * dH/dQ / scale, q_min, q_max)

``scale`` is max|dH/dQ| at the first iteration, so ``gain`` is a flow change
in L/hr. ``sign`` is fixed once by probing which direction raises J(t_f).
The per-point factor f(t) starts at 1, shrinks where dH/dQ(t) changes sign
between iterations and grows (up to ``step_max_factor``) where it keeps its
sign, so each grid point settles on its own root of dH/dQ.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import ConfigError, InfeasibleObjective
from ..model.schedule import ControlTrajectory
from ..model.thomas import ArrayLike, ProcessParams, breakthrough_ratio
from ..moments.dynamics import MOMENT_MODES, MomentTrajectory, integrate_moments
from ..moments.metrics import objective_time, objective_trajectory, objective_value
from ..utils.accounting import mass_removed_per_resin, time_to_ratio, volume_processed
from .adjoint import SweepResult, deterministic_sweep

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 500


@dataclass
class SolverConfig:
    """Horizon, grid and update-rule settings for the sweep optimizer."""

    t_final_hr: float = 300.0
    n_grid: int = 1000
    tolerance: float = 1e-9
    max_iterations: int = 50000
    gradient_gain_lph: float = 1e-3
    step_growth: float = 1.2
    step_shrink: float = 0.5
    step_max_factor: float = 4.0
    q_start_lph: float = 0.42
    moment_mode: str = "exact"
    stagnation_window: int = 500
    stagnation_rtol: float = 1e-12
    burn_in: int = 100
    target_ratio: float = 0.14
    log_every: int = 1000
    snapshot_every: int = 0

    @property
    def dt_hr(self) -> float:
        return self.t_final_hr / self.n_grid

    def validate(self) -> List[str]:
        errors = []
        if not self.t_final_hr > 0:
            errors.append("solver.t_final_hr: must be > 0")
        if self.n_grid < MIN_GRID_POINTS:
            errors.append(f"solver.n_grid: must be >= {MIN_GRID_POINTS} (dt <= t_final/{MIN_GRID_POINTS})")
        if not self.tolerance > 0:
            errors.append("solver.tolerance: must be > 0")
        if self.max_iterations < 1:
            errors.append("solver.max_iterations: must be >= 1")
        if not self.gradient_gain_lph > 0:
            errors.append("solver.gradient_gain_lph: must be > 0")
        if self.step_growth < 1.0:
            errors.append("solver.step_growth: must be >= 1")
        if not 0.0 < self.step_shrink < 1.0:
            errors.append("solver.step_shrink: must lie in (0, 1)")
        if self.step_max_factor < 1.0:
            errors.append("solver.step_max_factor: must be >= 1")
        if not self.q_start_lph > 0:
            errors.append("solver.q_start_lph: must be > 0")
        if self.moment_mode not in MOMENT_MODES:
            errors.append(f"solver.moment_mode: expected one of {MOMENT_MODES}")
        if self.stagnation_window < 1:
            errors.append("solver.stagnation_window: must be >= 1")
        if self.stagnation_rtol < 0:
            errors.append("solver.stagnation_rtol: must be >= 0")
        if self.burn_in < 0:
            errors.append("solver.burn_in: must be >= 0")
        if not 0.0 < self.target_ratio < 1.0:
            errors.append("solver.target_ratio: must lie in (0, 1)")
        if self.log_every < 1:
            errors.append("solver.log_every: must be >= 1")
        if self.snapshot_every < 0:
            errors.append("solver.snapshot_every: must be >= 0")
        return errors


@dataclass
class SolveHistory:
    """Per-iteration scalars."""

    iteration: List[int] = field(default_factory=list)
    max_dhdq: List[float] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    hamiltonian_mean: List[float] = field(default_factory=list)
    objective_at_target: List[float] = field(default_factory=list)

    def append(self, iteration: int, max_dhdq: float, objective: float, h_mean: float, j_target: float):
        self.iteration.append(iteration)
        self.max_dhdq.append(max_dhdq)
        self.objective.append(objective)
        self.hamiltonian_mean.append(h_mean)
        self.objective_at_target.append(j_target)


@dataclass
class FlowSnapshot:
    iteration: int
    flow_lph: np.ndarray
    dhdq: np.ndarray


@dataclass
class SolveReport:
    """Outcome of one optimization."""

    method: str
    converged: bool
    stop_reason: str
    iterations: int
    control: ControlTrajectory
    trajectory: MomentTrajectory
    dhdq: np.ndarray
    hamiltonian: np.ndarray
    objective_curve: np.ndarray
    history: SolveHistory
    c0_g_per_l: float
    resin_volume_l: float
    target_ratio: float
    gradient_sign: float = 1.0
    monotonicity_violations: int = 0
    snapshots: List[FlowSnapshot] = field(default_factory=list)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def time_grid(self) -> np.ndarray:
        return self.control.time_grid

    @property
    def final_flow_lph(self) -> float:
        return float(self.control.flow_lph[-1])

    @property
    def objective_final(self) -> float:
        return float(self.history.objective[-1]) if self.history.objective else float("nan")

    @property
    def objective_peak(self) -> float:
        return float(np.max(self.objective_curve))

    @property
    def objective_peak_time_hr(self) -> float:
        return float(self.time_grid[int(np.argmax(self.objective_curve))])

    def time_to_ratio(self, ratio: Optional[float] = None) -> Optional[float]:
        """Time at which psi first reaches ``ratio`` (default: target ratio)."""
        target = self.target_ratio if ratio is None else ratio
        return time_to_ratio(self.time_grid, self.trajectory.psi, target)

    def volume_processed_l(self, until_hr: Optional[float] = None) -> float:
        """Feed volume up to ``until_hr`` (default: time to the target ratio)."""
        return volume_processed(self.time_grid, self.control.flow_lph, self._horizon(until_hr))

    def mass_removed_per_resin(self, until_hr: Optional[float] = None) -> float:
        """g Cr per L resin up to ``until_hr`` (default: time to the target ratio)."""
        return mass_removed_per_resin(
            self.time_grid,
            self.trajectory.psi,
            self.control.flow_lph,
            self.c0_g_per_l,
            self.resin_volume_l,
            self._horizon(until_hr),
        )

    def _horizon(self, until_hr: Optional[float]) -> Optional[float]:
        target = self.time_to_ratio()
        if until_hr is None:
            return target
        return until_hr if target is None else min(until_hr, target)

    def summary(self) -> Dict[str, object]:
        """Scalar diagnostics for JSON output."""
        return {
            "method": self.method,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "final_flow_lph": self.final_flow_lph,
            "max_abs_dhdq": float(np.max(np.abs(self.dhdq))),
            "objective_final": self.objective_final,
            "objective_at_target_time": self.history.objective_at_target[-1] if self.history.objective_at_target else None,
            "objective_peak": self.objective_peak,
            "objective_peak_time_hr": self.objective_peak_time_hr,
            "target_ratio": self.target_ratio,
            "time_to_target_hr": self.time_to_ratio(),
            "volume_processed_l": self.volume_processed_l(),
            "mass_removed_g_per_l_resin": self.mass_removed_per_resin(),
            "gradient_sign": self.gradient_sign,
            "monotonicity_violations": self.monotonicity_violations,
            "floor_events": dict(self.trajectory.floor_events),
            **self.diagnostics,
        }


class FlowRateOptimizer:
    """Gradient iteration on Q(t) driven by the Hamiltonian flow gradient."""

    method = "deterministic"

    def __init__(self, params: ProcessParams, config: SolverConfig):
        """Initialize optimizer.

        Args:
            params: Process parameters (validated)
            config: Solver settings
        """
        errors = params.validate() + config.validate()
        if errors:
            raise ConfigError(errors)
        self.params = params
        self.config = config

    def initial_control(self) -> ControlTrajectory:
        """Constant schedule at q_start, clipped into the pump bounds."""
        q_start = self.config.q_start_lph
        if not self.params.q_min_lph <= q_start <= self.params.q_max_lph:
            logger.warning(
                f"q_start {q_start} L/hr outside [{self.params.q_min_lph}, {self.params.q_max_lph}]; clipped"
            )
        return ControlTrajectory.constant(self.params, q_start, self.config.t_final_hr, self.config.n_grid)

    def y1_initial(self, control: ControlTrajectory) -> float:
        """psi(0) at the starting flow."""
        return float(breakthrough_ratio(self.params, control.flow_lph[0], 0.0))

    def forward(self, control: ControlTrajectory, y1_init: float) -> MomentTrajectory:
        return integrate_moments(self.params, control, y1_init, self.config.moment_mode)

    def sweep(self, trajectory: MomentTrajectory) -> SweepResult:
        return deterministic_sweep(trajectory, self.params, self.config.moment_mode)

    def terminal_objective(self, trajectory: MomentTrajectory) -> float:
        return objective_value(trajectory.final, float(trajectory.flow_lph[-1]), self.params.c0_g_per_l)

    def objective_at_target_time(self, trajectory: MomentTrajectory, curve: np.ndarray) -> float:
        """J(t) at the grid point nearest t_m - sigma of the terminal state."""
        final = trajectory.final
        try:
            t_obj = objective_time(final.y2_mu1, final.sigma, -1.0)
        except InfeasibleObjective:
            return float("nan")
        return float(curve[trajectory.index_at(t_obj)])

    def _projected(self, control: ControlTrajectory, direction: np.ndarray) -> np.ndarray:
        """Zero the components that would push Q through an active bound."""
        flow = control.flow_lph
        blocked = ((flow <= control.q_min_lph) & (direction < 0)) | ((flow >= control.q_max_lph) & (direction > 0))
        return np.where(blocked, 0.0, direction)

    def _step(
        self, control: ControlTrajectory, dhdq: np.ndarray, sign: float, scale: float, factor: ArrayLike = 1.0
    ) -> ControlTrajectory:
        return control.clipped(control.flow_lph + self.config.gradient_gain_lph * factor * sign * dhdq / scale)

    def _adapt_factor(
        self, factor: np.ndarray, dhdq: np.ndarray, previous: np.ndarray, moved: np.ndarray
    ) -> np.ndarray:
        """Shrink the step where dH/dQ flipped sign since the last move, grow it elsewhere."""
        cfg = self.config
        flipped = moved & (dhdq * previous < 0)
        steady = moved & ~flipped
        factor = np.where(flipped, factor * cfg.step_shrink, factor)
        return np.where(steady, np.minimum(factor * cfg.step_growth, cfg.step_max_factor), factor)

    def _calibrate_sign(self, control: ControlTrajectory, dhdq: np.ndarray, scale: float, y1_init: float) -> float:
        """Pick the update sign that raises J(t_f) on a trial step."""
        j_up = self.terminal_objective(self.forward(self._step(control, dhdq, 1.0, scale), y1_init))
        j_down = self.terminal_objective(self.forward(self._step(control, dhdq, -1.0, scale), y1_init))
        sign = 1.0 if j_up >= j_down else -1.0
        logger.info(f"Update sign trial: J(+)={j_up:.10g}, J(-)={j_down:.10g} -> sign {sign:+.0f}")
        return sign

    def run(self, control: Optional[ControlTrajectory] = None) -> SolveReport:
        """Iterate sweeps and flow updates until the gradient vanishes.

        Args:
            control: Starting schedule (default: constant q_start)

        Returns:
            SolveReport; ``converged`` is False when the iteration cap is hit
        """
        cfg = self.config
        control = control if control is not None else self.initial_control()
        y1_init = self.y1_initial(control)
        degenerate = self.params.q_min_lph == self.params.q_max_lph

        logger.info(
            f"{self.method.capitalize()} solve: t_final={cfg.t_final_hr} hr, n_grid={cfg.n_grid}, "
            f"gain={cfg.gradient_gain_lph} L/hr, tol={cfg.tolerance:g}, mode={cfg.moment_mode}"
        )

        history = SolveHistory()
        snapshots: List[FlowSnapshot] = []
        sign, scale = 1.0, 1.0
        factor = np.ones(control.flow_lph.shape)
        previous: Optional[np.ndarray] = None
        moved = np.zeros(control.flow_lph.shape, dtype=bool)
        violations = 0
        converged, stop_reason = False, "iteration_cap"
        iteration = 0

        for iteration in range(1, cfg.max_iterations + 1):
            trajectory = self.forward(control, y1_init)
            sweep = self.sweep(trajectory)
            dhdq = sweep.dhdq
            curve = objective_trajectory(trajectory, self.params.c0_g_per_l)
            j_final = self.terminal_objective(trajectory)

            if iteration == 1:
                scale = float(np.max(np.abs(dhdq)))
                if scale > 0 and not degenerate:
                    sign = self._calibrate_sign(control, dhdq, scale, y1_init)
                else:
                    scale = 1.0

            if previous is not None:
                factor = self._adapt_factor(factor, dhdq, previous, moved)
            projected = self._projected(control, sign * dhdq)
            max_dhdq = float(np.max(np.abs(dhdq)))
            history.append(
                iteration,
                max_dhdq,
                j_final,
                float(np.mean(sweep.hamiltonian)),
                self.objective_at_target_time(trajectory, curve),
            )

            if cfg.snapshot_every and (iteration == 1 or iteration % cfg.snapshot_every == 0):
                snapshots.append(FlowSnapshot(iteration, control.flow_lph.copy(), dhdq.copy()))

            if iteration > cfg.burn_in + 1 and j_final < history.objective[-2] - 1e-12:
                violations += 1
                logger.debug(
                    f"Iteration {iteration}: J decreased {history.objective[-2]:.12g} -> {j_final:.12g}"
                )

            if iteration % cfg.log_every == 0:
                logger.info(
                    f"Iteration {iteration}: max|dH/dQ|={max_dhdq:.3e}, J={j_final:.10g}, "
                    f"Q(t_f)={control.flow_lph[-1]:.4f} L/hr"
                )

            if float(np.max(np.abs(projected))) < cfg.tolerance:
                converged, stop_reason = True, "gradient_tolerance"
                break
            if iteration > cfg.stagnation_window:
                j_past = history.objective[-1 - cfg.stagnation_window]
                if abs(j_final - j_past) <= cfg.stagnation_rtol * abs(j_final):
                    converged, stop_reason = True, "objective_stagnation"
                    break
            if iteration == cfg.max_iterations:
                break

            moved = projected != 0.0
            previous = dhdq
            control = self._step(control, dhdq, sign, scale, factor)

        if violations:
            logger.warning(f"J decreased on {violations} iterations after burn-in")
        if converged:
            logger.info(f"Converged after {iteration} iterations ({stop_reason})")
        else:
            logger.warning(f"Iteration cap {cfg.max_iterations} reached without convergence")

        if cfg.snapshot_every and (not snapshots or snapshots[-1].iteration != iteration):
            snapshots.append(FlowSnapshot(iteration, control.flow_lph.copy(), dhdq.copy()))

        return SolveReport(
            method=self.method,
            converged=converged,
            stop_reason=stop_reason,
            iterations=iteration,
            control=control,
            trajectory=trajectory,
            dhdq=dhdq,
            hamiltonian=sweep.hamiltonian,
            objective_curve=curve,
            history=history,
            c0_g_per_l=self.params.c0_g_per_l,
            resin_volume_l=self.params.resin_volume_l,
            target_ratio=cfg.target_ratio,
            gradient_sign=sign,
            monotonicity_violations=violations,
            snapshots=snapshots,
            diagnostics={
                **self._diagnostics(sweep),
                "max_abs_projected_dhdq": float(np.max(np.abs(projected))),
                "min_step_factor": float(np.min(factor)),
            },
        )

    def _diagnostics(self, sweep: SweepResult) -> Dict[str, float]:
        return {
            "max_abs_z4": float(np.max(np.abs(sweep.z[:, 3]))),
            "max_abs_phi0": float(np.max(np.abs(sweep.phi[0]))),
        }


def solve_deterministic(
    params: ProcessParams, solver_config: SolverConfig, control: Optional[ControlTrajectory] = None
) -> SolveReport:
    """Deterministic optimal flow schedule (no diffusion terms)."""
    return FlowRateOptimizer(params, solver_config).run(control)
