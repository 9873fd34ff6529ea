"""Analytic partial derivatives of the moment vector field.

Every component factors as F_k = u * g_k(y, t) with u = K_T*C0*(1 - y1), so

    dF_k/dy_i          = u_i g_k + u g_k,i
    d2F_k/dy_i dy_j    = u_i g_k,j + u_j g_k,i + u g_k,ij
    d3F_k/dy_i^2 dy_j  = 2 u_i g_k,ij + u_j g_k,ii + u g_k,iij

with u_i = -K_T*C0 on y1 only. The flow enters through K_T alone, hence
dF/dQ = rho*F with rho = (dK_T/dQ)/K_T, and likewise for every y-derivative.

Everything here is vectorized over the time grid: arrays carry a leading
axis of length n_points.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..model.thomas import ProcessParams, kt_flow_derivative, kt_from_conditions
from ..moments.dynamics import Y3_FLOOR, MomentState, check_mode


@dataclass
class FieldDerivatives:
    """Vector field and its partials along a trajectory."""

    field: np.ndarray  # (n, 4)             F_k
    jacobian: np.ndarray  # (n, 4, 4)       [k, i] = dF_k/dy_i
    hessian: np.ndarray  # (n, 4, 4, 4)     [k, i, j] = d2F_k/dy_i dy_j
    rho: np.ndarray  # (n,)                 (dK_T/dQ)/K_T
    third: Optional[np.ndarray] = None  # (n, 4, 4, 4) [k, i, j] = d3F_k/dy_i^2 dy_j

    @property
    def flow_gradient(self) -> np.ndarray:
        """dF/dQ, shape (n, 4)."""
        return self.rho[:, None] * self.field

    @property
    def diagonal_hessian(self) -> np.ndarray:
        """[k, i] = d2F_k/dy_i^2, shape (n, 4, 4)."""
        return np.einsum("nkii->nki", self.hessian)


def _skew_terms(y: np.ndarray, t: np.ndarray, exact: bool):
    """g4 with its gradient, Hessian and diagonal third partials.

    The component is switched off wherever y3 is at or below its floor.
    """
    n = y.shape[0]
    y1, y2, y3, y4 = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
    active = y3 > Y3_FLOOR
    s = np.where(active, y3, 1.0)
    d = t - y2
    d2 = d * d
    relax = 1.5 * d2 / s - 0.5

    grad = np.zeros((n, 4))
    hess = np.zeros((n, 4, 4))
    third = np.zeros((n, 4, 4))
    grad[:, 3] = -relax
    hess[:, 1, 3] = hess[:, 3, 1] = 3.0 * d / s
    hess[:, 2, 3] = hess[:, 3, 2] = 1.5 * d2 / s**2
    third[:, 2, 3] = -3.0 * d2 / s**3

    if exact:
        g = d**3 * s**-1.5 - 3.0 * d * s**-0.5 - y4 * relax
        g_d = 3.0 * d2 * s**-1.5 - 3.0 * s**-0.5 - 3.0 * y4 * d / s
        g_s = -1.5 * d**3 * s**-2.5 + 1.5 * d * s**-1.5 + 1.5 * y4 * d2 / s**2
        g_dd = 6.0 * d * s**-1.5 - 3.0 * y4 / s
        g_ds = -4.5 * d2 * s**-2.5 + 1.5 * s**-1.5 + 3.0 * y4 * d / s**2
        g_ss = 3.75 * d**3 * s**-3.5 - 2.25 * d * s**-2.5 - 3.0 * y4 * d2 / s**3

        # y2 enters through d = t - y2, so each y2-derivative flips a sign.
        grad[:, 1] = -g_d
        grad[:, 2] = g_s
        hess[:, 1, 1] = g_dd
        hess[:, 1, 2] = hess[:, 2, 1] = -g_ds
        hess[:, 2, 2] = g_ss
        third[:, 1, 1] = -6.0 * s**-1.5
        third[:, 1, 2] = -9.0 * d * s**-2.5 + 3.0 * y4 / s**2
        third[:, 1, 3] = -3.0 / s
        third[:, 2, 1] = -(11.25 * d2 * s**-3.5 - 2.25 * s**-2.5 - 6.0 * y4 * d / s**3)
        third[:, 2, 2] = -13.125 * d**3 * s**-4.5 + 5.625 * d * s**-3.5 + 9.0 * y4 * d2 / s**4
    else:
        d1 = t - y1
        g = d1**3 * s**-1.5 - y4 * relax
        grad[:, 0] = -3.0 * d1**2 * s**-1.5
        grad[:, 1] = 3.0 * y4 * d / s
        grad[:, 2] = -1.5 * d1**3 * s**-2.5 + 1.5 * y4 * d2 / s**2
        hess[:, 0, 0] = 6.0 * d1 * s**-1.5
        hess[:, 0, 2] = hess[:, 2, 0] = 4.5 * d1**2 * s**-2.5
        hess[:, 1, 1] = -3.0 * y4 / s
        hess[:, 1, 2] = hess[:, 2, 1] = -3.0 * y4 * d / s**2
        hess[:, 2, 2] = 3.75 * d1**3 * s**-3.5 - 3.0 * y4 * d2 / s**3
        third[:, 0, 0] = -6.0 * s**-1.5
        third[:, 0, 2] = -9.0 * d1 * s**-2.5
        third[:, 1, 2] = 3.0 * y4 / s**2
        third[:, 1, 3] = -3.0 / s
        third[:, 2, 0] = -11.25 * d1**2 * s**-3.5
        third[:, 2, 1] = 6.0 * y4 * d / s**3
        third[:, 2, 2] = -13.125 * d1**3 * s**-4.5 + 9.0 * y4 * d2 / s**4

    mask = active.astype(float)
    return (
        g * mask,
        grad * mask[:, None],
        hess * mask[:, None, None],
        third * mask[:, None, None],
    )


def field_derivatives(
    states: np.ndarray,
    time_grid: np.ndarray,
    params: ProcessParams,
    flow_lph: np.ndarray,
    mode: str = "exact",
    with_third: bool = False,
) -> FieldDerivatives:
    """Evaluate F and its partials at every grid point.

    Args:
        states: Moment states, shape (n, 4)
        time_grid: Times in hours, shape (n,)
        params: Process parameters
        flow_lph: Flow at each point, shape (n,)
        mode: Moment ODE variant
        with_third: Also compute d3F_k/dy_i^2 dy_j (needed by the stochastic sweep)

    Returns:
        FieldDerivatives
    """
    exact = check_mode(mode) == "exact"
    y = np.atleast_2d(np.asarray(states, dtype=float))
    t = np.atleast_1d(np.asarray(time_grid, dtype=float))
    flow = np.atleast_1d(np.asarray(flow_lph, dtype=float))
    n = y.shape[0]

    kt = np.atleast_1d(kt_from_conditions(params, flow))
    kc0 = kt * params.c0_g_per_l
    rho = np.atleast_1d(kt_flow_derivative(params, flow)) / kt
    u = kc0 * (1.0 - y[:, 0])
    du = np.zeros((n, 4))
    du[:, 0] = -kc0

    d = t - y[:, 1]
    g = np.empty((n, 4))
    g_grad = np.zeros((n, 4, 4))
    g_hess = np.zeros((n, 4, 4, 4))
    g_third = np.zeros((n, 4, 4, 4))

    g[:, 0] = y[:, 0]
    g_grad[:, 0, 0] = 1.0
    g[:, 1] = d
    g_grad[:, 1, 1] = -1.0
    g[:, 2] = d * d - y[:, 2]
    g_grad[:, 2, 1] = -2.0 * d
    g_grad[:, 2, 2] = -1.0
    g_hess[:, 2, 1, 1] = 2.0
    g[:, 3], g_grad[:, 3], g_hess[:, 3], g_third[:, 3] = _skew_terms(y, t, exact)

    field = u[:, None] * g
    jacobian = du[:, None, :] * g[:, :, None] + u[:, None, None] * g_grad
    hessian = (
        du[:, None, :, None] * g_grad[:, :, None, :]
        + du[:, None, None, :] * g_grad[:, :, :, None]
        + u[:, None, None, None] * g_hess
    )

    third = None
    if with_third:
        g_hess_diag = np.einsum("nkii->nki", g_hess)
        third = (
            2.0 * du[:, None, :, None] * g_hess
            + du[:, None, None, :] * g_hess_diag[:, :, :, None]
            + u[:, None, None, None] * g_third
        )

    return FieldDerivatives(field=field, jacobian=jacobian, hessian=hessian, rho=rho, third=third)


def linearize_vector_field(
    state: MomentState, time_hr: float, params: ProcessParams, flow_lph: float, mode: str = "exact"
) -> Tuple[np.ndarray, np.ndarray]:
    """Jacobian dF/dy (4x4) and flow gradient dF/dQ (4,) at one point."""
    derivs = field_derivatives(state.as_array()[None, :], [time_hr], params, [flow_lph], mode)
    return derivs.jacobian[0], derivs.flow_gradient[0]


def second_partials(
    state: MomentState, time_hr: float, params: ProcessParams, flow_lph: float, mode: str = "exact"
) -> np.ndarray:
    """d2F_k/dy_i^2 at one point, indexed [k, i]."""
    derivs = field_derivatives(state.as_array()[None, :], [time_hr], params, [flow_lph], mode)
    return derivs.diagonal_hessian[0]
