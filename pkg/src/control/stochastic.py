"""Stochastic maximum principle: second-order costates and the extended Hamiltonian.

Diffusion enters as g_k(t)^2 = g_tab,k(t)^2 + c_k^2 y_k^2, with the
tabulated part taken from ensemble increments and the optional
state-proportional part set by ``coeffs``. The forward sweep propagates the
drift only (expected trajectory).

Backward dynamics, with D[k, i] = d2F_k/dy_i^2 (diagonal second partials):

    dz/dt = -J^T z - c^2 y omega
    domega/dt = -(2 J^T omega + D^T z + c^2 omega)

and their flow derivatives phi = dz/dQ, Omega = domega/dQ. The gradient adds
1/2 g^2 Omega to the deterministic expression.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..model.schedule import ControlTrajectory
from ..model.thomas import ProcessParams
from ..moments.dynamics import MomentState, MomentTrajectory
from ..uncertainty.sampling import EnsembleStats, UncertaintySpec, ensemble_moments, estimate_diffusion
from .adjoint import SweepResult, deterministic_sweep, march_backward
from .derivatives import field_derivatives
from .solver import FlowRateOptimizer, SolveReport, SolverConfig

logger = logging.getLogger(__name__)


@dataclass
class DiffusionModel:
    """Diffusion coefficients on the solver grid."""

    g_table: np.ndarray  # (n, 4), moment-units per sqrt(hr)
    coeffs: np.ndarray  # (4,), per sqrt(hr)

    def __post_init__(self):
        self.g_table = np.atleast_2d(np.asarray(self.g_table, dtype=float))
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(4)
        if np.any(self.g_table < 0) or not np.all(np.isfinite(self.g_table)):
            raise ConfigError(["uncertainty.diffusion: g table must be finite and >= 0"])

    @classmethod
    def zero(cls, n_points: int) -> "DiffusionModel":
        return cls(np.zeros((n_points, 4)), np.zeros(4))

    @property
    def state_dependent(self) -> bool:
        return bool(np.any(self.coeffs != 0.0))

    def g_squared(self, states: np.ndarray) -> np.ndarray:
        """g^2 at each grid point, shape (n, 4)."""
        return self.g_table**2 + self.coeffs**2 * np.asarray(states) ** 2

    def g_values(self, states: np.ndarray) -> np.ndarray:
        return np.sqrt(self.g_squared(states))


@dataclass
class SecondOrderAdjoint:
    """omega = d2J/dy_i^2 (diagonal closure) and Omega = domega/dQ on the grid."""

    omega: np.ndarray
    big_omega: np.ndarray


@dataclass
class StochasticSweepResult:
    base: SweepResult
    second_order: SecondOrderAdjoint
    omega_dot: np.ndarray
    big_omega_dot: np.ndarray
    hamiltonian: np.ndarray
    dhdq: np.ndarray


def stochastic_hamiltonian(z: np.ndarray, omega: np.ndarray, field: np.ndarray, g: np.ndarray) -> np.ndarray:
    """H = sum_i z_i F_i + omega_i g_i^2 / 2 over the last axis."""
    g = np.asarray(g)
    return np.sum(np.asarray(z) * np.asarray(field) + 0.5 * np.asarray(omega) * g * g, axis=-1)


def stochastic_adjoint_rhs(
    z: np.ndarray,
    omega: np.ndarray,
    state: MomentState,
    time_hr: float,
    params: ProcessParams,
    flow_lph: float,
    coeffs: Optional[np.ndarray] = None,
    mode: str = "exact",
) -> Tuple[np.ndarray, np.ndarray]:
    """(dz/dt, domega/dt) at one point.

    Tabulated diffusion has no y-dependence, so only the state-proportional
    part (``coeffs``) contributes d(g^2)/dy = 2 c^2 y and d2(g^2)/dy2 = 2 c^2.
    """
    derivs = field_derivatives(state.as_array()[None, :], [time_hr], params, [flow_lph], mode)
    jac = derivs.jacobian[0]
    diag = derivs.diagonal_hessian[0]
    c2 = np.zeros(4) if coeffs is None else np.asarray(coeffs, dtype=float) ** 2
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    y = state.as_array()
    z_dot = -jac.T @ z - c2 * y * omega
    omega_dot = -(2.0 * jac.T @ omega + diag.T @ z + c2 * omega)
    return z_dot, omega_dot


def _block_step(jac_t: np.ndarray, diag_t: np.ndarray, states: np.ndarray, c2: np.ndarray, dt: float) -> np.ndarray:
    """Backward Euler step matrix for the coupled (first-order, second-order) pair."""
    n = jac_t.shape[0]
    eye = np.eye(4)[None, :, :]
    step = np.zeros((n, 8, 8))
    step[:, :4, :4] = eye + dt * jac_t
    step[:, :4, 4:] = dt * np.einsum("ni,ij->nij", c2 * states, np.eye(4))
    step[:, 4:, :4] = dt * diag_t
    step[:, 4:, 4:] = eye + dt * (2.0 * jac_t + np.diag(c2)[None, :, :])
    return step


def stochastic_sweep(
    trajectory: MomentTrajectory, params: ProcessParams, diffusion: DiffusionModel, mode: str = "exact"
) -> StochasticSweepResult:
    """Deterministic sweep extended with omega, Omega and the diffusion gradient term.

    With state-independent diffusion z and phi come unchanged from the
    deterministic sweep and the second-order costates are marched after them.
    """
    dt = trajectory.dt_hr
    base = deterministic_sweep(trajectory, params, mode, with_third=True)
    d = base.derivatives
    y = trajectory.states
    theta = base.theta
    c2 = diffusion.coeffs**2

    jac_t = np.swapaxes(d.jacobian, 1, 2)
    diag_t = np.swapaxes(d.diagonal_hessian, 1, 2)
    rho = d.rho[:, None]
    coupling = np.einsum("nkij,nj->nki", d.hessian, theta)  # M
    third_coupling = np.einsum("nkij,nj->nki", d.third, theta)  # N_E
    # (M + rho J)^T and (N_E + rho D)^T, indexed [n, i, k]
    flow_jac_t = np.swapaxes(coupling + rho[:, :, None] * d.jacobian, 1, 2)
    flow_diag_t = np.swapaxes(third_coupling + rho[:, :, None] * d.diagonal_hessian, 1, 2)

    z, phi = base.z, base.phi
    z_dot, phi_dot = base.z_dot, base.phi_dot
    zeros = np.zeros(4)

    if diffusion.state_dependent:
        step = _block_step(jac_t, diag_t, y, c2, dt)
        joint = march_backward(step, np.zeros((y.shape[0], 8)), np.concatenate([base.z[-1], zeros]))
        z, omega = joint[:, :4], joint[:, 4:]

        flow_source = np.empty((y.shape[0], 8))
        flow_source[:, :4] = dt * (np.einsum("nik,nk->ni", flow_jac_t, z) + c2 * theta * omega)
        flow_source[:, 4:] = dt * (
            2.0 * np.einsum("nik,nk->ni", flow_jac_t, omega) + np.einsum("nik,nk->ni", flow_diag_t, z)
        )
        joint = march_backward(step, flow_source, np.zeros(8))
        phi, big_omega = joint[:, :4], joint[:, 4:]

        z_dot = -np.einsum("nik,nk->ni", jac_t, z) - c2 * y * omega
        phi_dot = (
            -np.einsum("nik,nk->ni", jac_t, phi)
            - np.einsum("nik,nk->ni", flow_jac_t, z)
            - c2 * (theta * omega + y * big_omega)
        )
    else:
        step = np.eye(4)[None, :, :] + 2.0 * dt * jac_t
        omega = march_backward(step, dt * np.einsum("nik,nk->ni", diag_t, z), zeros)
        source = dt * (
            2.0 * np.einsum("nik,nk->ni", flow_jac_t, omega)
            + np.einsum("nik,nk->ni", flow_diag_t, z)
            + np.einsum("nik,nk->ni", diag_t, phi)
        )
        big_omega = march_backward(step, source, zeros)

    omega_dot = -(2.0 * np.einsum("nik,nk->ni", jac_t, omega) + np.einsum("nik,nk->ni", diag_t, z) + c2 * omega)
    big_omega_dot = -(
        2.0 * np.einsum("nik,nk->ni", flow_jac_t, omega)
        + 2.0 * np.einsum("nik,nk->ni", jac_t, big_omega)
        + np.einsum("nik,nk->ni", flow_diag_t, z)
        + np.einsum("nik,nk->ni", diag_t, phi)
        + c2 * big_omega
    )

    g2 = diffusion.g_squared(y)
    dhdq = -np.sum(z_dot * theta, axis=1) + np.sum(d.field * phi, axis=1) + np.sum(0.5 * g2 * big_omega, axis=1)
    if diffusion.state_dependent:
        base = SweepResult(d, theta, z, z_dot, phi, phi_dot, base.hamiltonian, base.dhdq)
    else:
        # Same arithmetic as the deterministic gradient plus the diffusion term.
        dhdq = base.dhdq + np.sum(0.5 * g2 * big_omega, axis=1)

    return StochasticSweepResult(
        base=base,
        second_order=SecondOrderAdjoint(omega, big_omega),
        omega_dot=omega_dot,
        big_omega_dot=big_omega_dot,
        hamiltonian=stochastic_hamiltonian(z, omega, d.field, np.sqrt(g2)),
        dhdq=dhdq,
    )


class StochasticFlowRateOptimizer(FlowRateOptimizer):
    """Sweep optimizer whose gradient carries the second-order diffusion terms."""

    method = "stochastic"

    def __init__(self, params: ProcessParams, config: SolverConfig, diffusion: DiffusionModel):
        super().__init__(params, config)
        if diffusion.g_table.shape != (config.n_grid + 1, 4):
            raise ConfigError(
                [f"uncertainty.diffusion: g table shape {diffusion.g_table.shape} != ({config.n_grid + 1}, 4)"]
            )
        self.diffusion = diffusion

    def sweep(self, trajectory: MomentTrajectory) -> SweepResult:
        result = stochastic_sweep(trajectory, self.params, self.diffusion, self.config.moment_mode)
        self._last = result
        return SweepResult(
            derivatives=result.base.derivatives,
            theta=result.base.theta,
            z=result.base.z,
            z_dot=result.base.z_dot,
            phi=result.base.phi,
            phi_dot=result.base.phi_dot,
            hamiltonian=result.hamiltonian,
            dhdq=result.dhdq,
        )

    def _diagnostics(self, sweep: SweepResult):
        diagnostics = super()._diagnostics(sweep)
        diagnostics["max_abs_omega4"] = float(np.max(np.abs(self._last.second_order.omega[:, 3])))
        diagnostics["max_abs_Omega4"] = float(np.max(np.abs(self._last.second_order.big_omega[:, 3])))
        return diagnostics


def diffusion_from_ensemble(stats: EnsembleStats, spec: UncertaintySpec) -> DiffusionModel:
    """Diffusion model from ensemble increment variances and the configured mode."""
    g_table = estimate_diffusion(stats, smoothing_window=spec.smoothing_window)
    coeffs = np.asarray(spec.diffusion_coeffs, dtype=float)
    if spec.diffusion_mode == "tabulated":
        coeffs = np.zeros(4)
    return DiffusionModel(g_table, coeffs)


def solve_stochastic(
    params: ProcessParams,
    uncertainty: UncertaintySpec,
    solver_config: SolverConfig,
    diffusion: Optional[DiffusionModel] = None,
    control: Optional[ControlTrajectory] = None,
    jobs: int = 1,
) -> SolveReport:
    """Stochastic optimal flow schedule.

    Without explicit ``diffusion`` the tables are estimated from a parameter
    ensemble run under the starting schedule.

    Args:
        params: Nominal process parameters
        uncertainty: Ensemble and diffusion settings
        solver_config: Solver settings
        diffusion: Precomputed diffusion model on the solver grid
        control: Starting schedule (default: constant q_start)
        jobs: Worker processes for the ensemble

    Returns:
        SolveReport with ``method == "stochastic"``
    """
    optimizer_control = control
    if diffusion is None:
        starter = FlowRateOptimizer(params, solver_config)
        start = control if control is not None else starter.initial_control()
        stats = ensemble_moments(params, uncertainty, start, solver_config.moment_mode, jobs)
        diffusion = diffusion_from_ensemble(stats, uncertainty)
        logger.info(f"Diffusion tables estimated: max g = {np.max(diffusion.g_table, axis=0)}")
    return StochasticFlowRateOptimizer(params, solver_config, diffusion).run(optimizer_control)
