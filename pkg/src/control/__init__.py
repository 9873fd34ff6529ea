"""Deterministic and stochastic maximum-principle solvers for the flow schedule."""

from ..model.schedule import ControlTrajectory
from .adjoint import (
    AdjointState,
    SensitivityState,
    SweepResult,
    adjoint_rhs,
    deterministic_sweep,
    hamiltonian,
    hamiltonian_q_gradient,
    sensitivity_rhs,
    terminal_adjoint,
)
from .comparison import ComparisonReport, mc_deterministic_comparison
from .derivatives import FieldDerivatives, field_derivatives, linearize_vector_field, second_partials
from .solver import FlowRateOptimizer, SolveHistory, SolveReport, SolverConfig, solve_deterministic
from .stochastic import (
    DiffusionModel,
    SecondOrderAdjoint,
    StochasticFlowRateOptimizer,
    diffusion_from_ensemble,
    solve_stochastic,
    stochastic_adjoint_rhs,
    stochastic_hamiltonian,
    stochastic_sweep,
)

__all__ = [
    "AdjointState",
    "ComparisonReport",
    "ControlTrajectory",
    "DiffusionModel",
    "FieldDerivatives",
    "FlowRateOptimizer",
    "SecondOrderAdjoint",
    "SensitivityState",
    "SolveHistory",
    "SolveReport",
    "SolverConfig",
    "StochasticFlowRateOptimizer",
    "SweepResult",
    "adjoint_rhs",
    "deterministic_sweep",
    "diffusion_from_ensemble",
    "field_derivatives",
    "hamiltonian",
    "hamiltonian_q_gradient",
    "linearize_vector_field",
    "mc_deterministic_comparison",
    "second_partials",
    "sensitivity_rhs",
    "solve_deterministic",
    "solve_stochastic",
    "stochastic_adjoint_rhs",
    "stochastic_hamiltonian",
    "stochastic_sweep",
    "terminal_adjoint",
]
