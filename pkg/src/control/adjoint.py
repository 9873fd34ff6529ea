"""Adjoint, sensitivity and Hamiltonian-gradient sweeps for the deterministic problem."""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import NumericalAbort
from ..model.thomas import ProcessParams
from ..moments.dynamics import Y3_FLOOR, MomentState, MomentTrajectory
from .derivatives import FieldDerivatives, field_derivatives, linearize_vector_field

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjointState:
    """Costates z1..z4 (gradient of J with respect to the moments)."""

    z: np.ndarray

    @property
    def a(self) -> float:
        return float(self.z[0])

    @property
    def b(self) -> float:
        return float(self.z[1])

    @property
    def c(self) -> float:
        return float(self.z[2])


@dataclass(frozen=True)
class SensitivityState:
    """theta = dy/dQ and phi = dz/dQ at one time point."""

    theta: np.ndarray
    phi: np.ndarray


@dataclass
class SweepResult:
    """Arrays from one forward/backward pass, all on the solver grid."""

    derivatives: FieldDerivatives
    theta: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    hamiltonian: np.ndarray
    dhdq: np.ndarray

    def adjoint_at(self, index: int) -> AdjointState:
        return AdjointState(self.z[index].copy())

    def sensitivity_at(self, index: int) -> SensitivityState:
        return SensitivityState(self.theta[index].copy(), self.phi[index].copy())


def terminal_adjoint(state_f: MomentState, flow_f: float, c0_g_per_l: float) -> AdjointState:
    """z(t_f) = dJ/dy at the final state.

    With J = C0*(1 - y1)*Q*(y2 - sqrt(y3)):
    a = -(y2 - sqrt(y3))*C0*Q, b = (1 - y1)*C0*Q, c = -(1 - y1)*C0*Q/(2*sqrt(y3)), z4 = 0.
    The printed stationarity condition drops the (1 - y1) factor from c; the
    algorithm's version with the factor is used.

    Raises:
        NumericalAbort: If y3(t_f) is at or below its floor
    """
    if state_f.y3_mu2c <= Y3_FLOOR:
        raise NumericalAbort(
            f"Singular terminal adjoint: y3(t_f) = {state_f.y3_mu2c:.3e} at floor",
            {"state_f": state_f.as_array().tolist()},
        )
    scale = c0_g_per_l * flow_f
    sigma = math.sqrt(state_f.y3_mu2c)
    remaining = 1.0 - state_f.y1_mu0
    return AdjointState(
        np.array(
            [
                -(state_f.y2_mu1 - sigma) * scale,
                remaining * scale,
                -remaining * scale / (2.0 * sigma),
                0.0,
            ]
        )
    )


def adjoint_rhs(
    z: np.ndarray, state: MomentState, time_hr: float, params: ProcessParams, flow_lph: float, mode: str = "exact"
) -> np.ndarray:
    """dz/dt = -(dF/dy)^T z."""
    jacobian, _ = linearize_vector_field(state, time_hr, params, flow_lph, mode)
    return -jacobian.T @ np.asarray(z, dtype=float)


def sensitivity_rhs(
    theta: np.ndarray,
    phi: np.ndarray,
    state: MomentState,
    z: np.ndarray,
    time_hr: float,
    params: ProcessParams,
    flow_lph: float,
    mode: str = "exact",
) -> Tuple[np.ndarray, np.ndarray]:
    """(dtheta/dt, dphi/dt) at one point.

    dtheta/dt = J theta + dF/dQ
    dphi/dt   = -J^T phi - (sum_j H[:, :, j] theta_j)^T z - rho J^T z
    """
    derivs = field_derivatives(state.as_array()[None, :], [time_hr], params, [flow_lph], mode)
    jac = derivs.jacobian[0]
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    theta_dot = jac @ theta + derivs.flow_gradient[0]
    contracted = derivs.hessian[0] @ theta
    phi_dot = -jac.T @ np.asarray(phi, dtype=float) - contracted.T @ z - derivs.rho[0] * (jac.T @ z)
    return theta_dot, phi_dot


def hamiltonian(z: np.ndarray, field: np.ndarray) -> np.ndarray:
    """H = sum_i z_i F_i over the last axis."""
    return np.sum(np.asarray(z) * np.asarray(field), axis=-1)


def hamiltonian_q_gradient(
    theta: np.ndarray, phi: np.ndarray, y_dot: np.ndarray, z_dot: np.ndarray
) -> np.ndarray:
    """dH/dQ = -sum_i zdot_i theta_i + sum_i ydot_i phi_i over the last axis."""
    return -np.sum(np.asarray(z_dot) * np.asarray(theta), axis=-1) + np.sum(
        np.asarray(y_dot) * np.asarray(phi), axis=-1
    )


def march_forward(step: np.ndarray, source: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """x_{n+1} = step_n @ x_n + source_n for n = 0..N-1."""
    out = np.empty_like(source)
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    for n in range(source.shape[0] - 1):
        x = step[n] @ x + source[n]
        out[n + 1] = x
    return out


def march_backward(step: np.ndarray, source: np.ndarray, x_final: np.ndarray) -> np.ndarray:
    """x_{n-1} = step_n @ x_n + source_n for n = N..1."""
    out = np.empty_like(source)
    last = source.shape[0] - 1
    out[last] = x_final
    x = np.asarray(x_final, dtype=float)
    for n in range(last, 0, -1):
        x = step[n] @ x + source[n]
        out[n - 1] = x
    return out


def forward_sensitivity(derivs: FieldDerivatives, dt: float) -> np.ndarray:
    """Euler sweep of theta from theta(0) = 0."""
    n, dim = derivs.field.shape
    step = np.eye(dim)[None, :, :] + dt * derivs.jacobian
    return march_forward(step, dt * derivs.flow_gradient, np.zeros(dim))


def backward_costate(derivs: FieldDerivatives, z_final: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Backward Euler sweep of z from z(t_f); returns (z, dz/dt)."""
    jac_t = np.swapaxes(derivs.jacobian, 1, 2)
    step = np.eye(jac_t.shape[1])[None, :, :] + dt * jac_t
    z = march_backward(step, np.zeros_like(derivs.field), z_final)
    z_dot = -np.einsum("nik,nk->ni", jac_t, z)
    return z, z_dot


def backward_flow_costate(
    derivs: FieldDerivatives, z: np.ndarray, theta: np.ndarray, dt: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Backward Euler sweep of phi = dz/dQ from phi(t_f) = 0; returns (phi, dphi/dt)."""
    jac_t = np.swapaxes(derivs.jacobian, 1, 2)
    coupling = np.einsum("nkij,nj->nki", derivs.hessian, theta)
    forcing = -np.einsum("nki,nk->ni", coupling, z) - derivs.rho[:, None] * np.einsum("nik,nk->ni", jac_t, z)

    step = np.eye(jac_t.shape[1])[None, :, :] + dt * jac_t
    phi = march_backward(step, -dt * forcing, np.zeros(z.shape[1]))
    phi_dot = -np.einsum("nik,nk->ni", jac_t, phi) + forcing
    return phi, phi_dot


def deterministic_sweep(
    trajectory: MomentTrajectory, params: ProcessParams, mode: str = "exact", with_third: bool = False
) -> SweepResult:
    """One pass of the sensitivity (forward) and costate (backward) sweeps.

    Args:
        trajectory: Forward moment trajectory under the current flow
        params: Process parameters
        mode: Moment ODE variant used for the partials
        with_third: Keep third partials for the stochastic extension

    Returns:
        SweepResult with theta, z, phi, their rates, H(t) and dH/dQ(t)
    """
    dt = trajectory.dt_hr
    derivs = field_derivatives(
        trajectory.states, trajectory.time_grid, params, trajectory.flow_lph, mode, with_third=with_third
    )
    theta = forward_sensitivity(derivs, dt)

    z_final = terminal_adjoint(trajectory.final, float(trajectory.flow_lph[-1]), params.c0_g_per_l).z
    z, z_dot = backward_costate(derivs, z_final, dt)
    phi, phi_dot = backward_flow_costate(derivs, z, theta, dt)

    return SweepResult(
        derivatives=derivs,
        theta=theta,
        z=z,
        z_dot=z_dot,
        phi=phi,
        phi_dot=phi_dot,
        hamiltonian=hamiltonian(z, derivs.field),
        dhdq=hamiltonian_q_gradient(theta, phi, derivs.field, z_dot),
    )
