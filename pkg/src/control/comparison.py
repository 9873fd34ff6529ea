"""Monte Carlo family of deterministic optima set against one stochastic optimum."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import ChromateControlError
from ..model.thomas import ProcessParams
from ..uncertainty.sampling import UncertaintySpec, sample_parameters
from ..utils.parallel import map_ordered
from .solver import SolveReport, SolverConfig, solve_deterministic
from .stochastic import DiffusionModel, solve_stochastic

logger = logging.getLogger(__name__)


@dataclass
class ComparisonReport:
    """Pointwise flow envelope of the deterministic family and the stochastic schedule."""

    time_grid: np.ndarray
    det_min: np.ndarray
    det_mean: np.ndarray
    det_max: np.ndarray
    stochastic: SolveReport
    members: List[SolveReport]
    excluded: List[int] = field(default_factory=list)

    @property
    def containment(self) -> float:
        """Share of grid points where the stochastic flow lies inside the family envelope."""
        q = self.stochastic.control.flow_lph
        return float(np.mean((q >= self.det_min) & (q <= self.det_max)))

    @property
    def psi_at_peak_deterministic(self) -> float:
        """Mean over members of psi at each member's objective peak."""
        values = [m.trajectory.psi[int(np.argmax(m.objective_curve))] for m in self.members]
        return float(np.mean(values))

    @property
    def psi_at_peak_stochastic(self) -> float:
        report = self.stochastic
        return float(report.trajectory.psi[int(np.argmax(report.objective_curve))])

    def summary(self):
        return {
            "members": len(self.members),
            "excluded": self.excluded,
            "containment": self.containment,
            "psi_at_objective_peak_deterministic": self.psi_at_peak_deterministic,
            "psi_at_objective_peak_stochastic": self.psi_at_peak_stochastic,
            "stochastic": self.stochastic.summary(),
        }


def _solve_member(task) -> Optional[SolveReport]:
    params, solver_config, index = task
    try:
        report = solve_deterministic(params, solver_config)
    except ChromateControlError as exc:
        logger.warning(f"Monte Carlo member {index} aborted: {exc}")
        return None
    if not report.converged:
        logger.warning(f"Monte Carlo member {index} did not converge in {report.iterations} iterations")
        return None
    return report


def mc_deterministic_comparison(
    params: ProcessParams,
    uncertainty: UncertaintySpec,
    solver_config: SolverConfig,
    n_runs: int,
    jobs: int = 1,
    diffusion: Optional[DiffusionModel] = None,
) -> ComparisonReport:
    """Deterministic optima under ``n_runs`` sampled parameter sets plus one stochastic optimum.

    Unconverged or aborted members are excluded from the envelope and listed.

    Args:
        params: Nominal parameters
        uncertainty: Sampling widths, seed and diffusion settings
        solver_config: Solver settings shared by every run
        n_runs: Deterministic family size (>= 2)
        jobs: Worker processes
        diffusion: Diffusion model for the stochastic run (estimated if None)

    Returns:
        ComparisonReport
    """
    if n_runs < 2:
        raise ValueError(f"n_runs must be >= 2, got {n_runs}")

    tasks = [(sample_parameters(params, uncertainty, i), solver_config, i) for i in range(n_runs)]
    results = map_ordered(_solve_member, tasks, jobs)
    excluded = [i for i, report in enumerate(results) if report is None]
    members = [report for report in results if report is not None]
    if not members:
        raise ChromateControlError(f"All {n_runs} Monte Carlo members failed")
    if excluded:
        logger.warning(f"{len(excluded)} of {n_runs} Monte Carlo members excluded: {excluded}")

    flows = np.stack([report.control.flow_lph for report in members])
    stochastic = solve_stochastic(params, uncertainty, solver_config, diffusion=diffusion, jobs=jobs)

    report = ComparisonReport(
        time_grid=members[0].time_grid.copy(),
        det_min=flows.min(axis=0),
        det_mean=flows.mean(axis=0),
        det_max=flows.max(axis=0),
        stochastic=stochastic,
        members=members,
        excluded=excluded,
    )
    logger.info(f"Stochastic flow inside deterministic envelope at {report.containment:.1%} of grid points")
    return report
