"""Shared fixtures: default column, short solver horizons and small ensembles."""

import pytest

from src.config import ScenarioConfig
from src.control.solver import SolverConfig, solve_deterministic
from src.control.stochastic import solve_stochastic
from src.model.thomas import ProcessParams
from src.uncertainty.sampling import UncertaintySpec


@pytest.fixture
def params():
    return ProcessParams()


@pytest.fixture
def short_solver():
    """A few iterations on the coarsest allowed grid."""
    return SolverConfig(t_final_hr=300.0, n_grid=500, max_iterations=3, log_every=1)


@pytest.fixture
def small_uncertainty():
    return UncertaintySpec(sample_count=6, n_paths=4, mc_runs=2, seed=11)


@pytest.fixture
def scenario(short_solver, small_uncertainty, params):
    return ScenarioConfig(process=params, solver=short_solver, uncertainty=small_uncertainty)


@pytest.fixture(scope="session")
def default_deterministic_report():
    """Full-scale deterministic optimum on the shipped defaults (slow tests only)."""
    return solve_deterministic(ProcessParams(), SolverConfig())


@pytest.fixture(scope="session")
def default_stochastic_report():
    """Full-scale stochastic optimum on the shipped defaults (slow tests only)."""
    return solve_stochastic(ProcessParams(), UncertaintySpec(), SolverConfig())
