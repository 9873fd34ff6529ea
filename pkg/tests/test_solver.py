import dataclasses
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.control.solver import FlowRateOptimizer, SolverConfig, solve_deterministic
from src.errors import ConfigError
from src.model.thomas import time_to_ratio_constant


def test_solver_config_validation():
    errors = SolverConfig(n_grid=100, tolerance=0.0, target_ratio=1.2).validate()
    assert any(e.startswith("solver.n_grid") for e in errors)
    assert any(e.startswith("solver.tolerance") for e in errors)
    assert any(e.startswith("solver.target_ratio") for e in errors)
    assert SolverConfig().validate() == []


def test_optimizer_rejects_invalid_config(params):
    with pytest.raises(ConfigError) as info:
        FlowRateOptimizer(params, SolverConfig(n_grid=10))
    assert info.value.exit_code == 2


def test_iteration_cap_reports_unconverged(params, short_solver):
    config = dataclasses.replace(short_solver, q_start_lph=0.8, tolerance=1e-15)
    report = solve_deterministic(params, config)
    assert not report.converged
    assert report.stop_reason == "iteration_cap"
    assert report.iterations == 3
    assert report.history.iteration == [1, 2, 3]
    assert report.gradient_sign in (1.0, -1.0)
    assert report.summary()["converged"] is False


def test_degenerate_pump_bounds_converge_immediately(params, short_solver):
    pinned = dataclasses.replace(params, q_min_lph=0.42, q_max_lph=0.42)
    report = solve_deterministic(pinned, short_solver)
    assert report.converged
    assert report.stop_reason == "gradient_tolerance"
    assert report.iterations == 1
    assert np.all(report.control.flow_lph == 0.42)


def test_flow_stays_within_pump_bounds(params):
    config = SolverConfig(n_grid=500, max_iterations=20, gradient_gain_lph=0.2, q_start_lph=1.2, log_every=5)
    report = solve_deterministic(params, config)
    assert np.all(report.control.flow_lph >= params.q_min_lph)
    assert np.all(report.control.flow_lph <= params.q_max_lph)


def test_first_step_follows_calibrated_sign(params):
    config = SolverConfig(n_grid=500, max_iterations=2, q_start_lph=0.8, tolerance=1e-15)
    report = solve_deterministic(params, config)
    assert report.history.objective[1] >= report.history.objective[0]
    assert np.max(np.abs(report.control.flow_lph - 0.8)) == pytest.approx(config.gradient_gain_lph)


def test_skewness_mode_does_not_change_the_control(params, short_solver):
    config = dataclasses.replace(short_solver, q_start_lph=0.8, tolerance=1e-15)
    exact = solve_deterministic(params, dataclasses.replace(config, moment_mode="exact"))
    faithful = solve_deterministic(params, dataclasses.replace(config, moment_mode="paper_faithful"))
    assert_allclose(exact.control.flow_lph, faithful.control.flow_lph, rtol=0, atol=1e-12)
    assert exact.diagnostics["max_abs_z4"] == 0.0
    assert faithful.diagnostics["max_abs_z4"] == 0.0


def test_snapshots_every_iteration(params, short_solver):
    config = dataclasses.replace(short_solver, q_start_lph=0.8, tolerance=1e-15, snapshot_every=1)
    report = solve_deterministic(params, config)
    assert [s.iteration for s in report.snapshots] == [1, 2, 3]
    assert report.snapshots[0].flow_lph.shape == report.time_grid.shape
    assert np.all(report.snapshots[0].flow_lph == 0.8)


def test_start_flow_outside_bounds_is_clipped(params, short_solver, caplog):
    optimizer = FlowRateOptimizer(params, dataclasses.replace(short_solver, q_start_lph=2.0))
    with caplog.at_level(logging.WARNING):
        control = optimizer.initial_control()
    assert np.all(control.flow_lph == params.q_max_lph)
    assert "clipped" in caplog.text


def test_accounting_stops_at_target_ratio(params):
    config = SolverConfig(n_grid=3000, max_iterations=1, q_start_lph=0.8, tolerance=1e-15)
    report = solve_deterministic(params, config)
    assert np.all(report.control.flow_lph == 0.8)

    t_target = report.time_to_ratio()
    assert t_target == pytest.approx(time_to_ratio_constant(params, 0.8, 0.14), rel=1e-2)
    assert report.volume_processed_l() == pytest.approx(0.8 * t_target, rel=1e-9)
    assert report.volume_processed_l(until_hr=20.0) == pytest.approx(16.0, rel=1e-9)

    removed = report.mass_removed_per_resin()
    upper = params.c0_g_per_l * 0.8 * t_target / params.resin_volume_l
    assert 0.86 * upper < removed < upper

    summary = report.summary()
    assert summary["time_to_target_hr"] == pytest.approx(t_target)
    assert summary["iterations"] == 1


@pytest.mark.slow
def test_default_run_improves_on_starting_schedule(default_deterministic_report):
    report = default_deterministic_report
    assert report.history.objective[-1] > report.history.objective[0]
    assert report.monotonicity_violations == 0


def test_step_adaptation_config_validation():
    errors = SolverConfig(step_growth=0.9, step_shrink=1.0, step_max_factor=0.5).validate()
    assert any(e.startswith("solver.step_growth") for e in errors)
    assert any(e.startswith("solver.step_shrink") for e in errors)
    assert any(e.startswith("solver.step_max_factor") for e in errors)


def test_step_factor_shrinks_on_sign_flip_and_grows_elsewhere(params):
    optimizer = FlowRateOptimizer(params, SolverConfig(step_growth=1.5, step_shrink=0.5, step_max_factor=2.0))
    factor = np.array([1.0, 1.0, 1.6, 1.0])
    previous = np.array([1.0, 1.0, 1.0, -1.0])
    dhdq = np.array([-2.0, 3.0, 0.5, 1.0])
    moved = np.array([True, True, True, False])
    assert_allclose(optimizer._adapt_factor(factor, dhdq, previous, moved), [0.5, 1.5, 2.0, 1.0])


def test_step_factor_is_reported(params, short_solver):
    report = solve_deterministic(params, dataclasses.replace(short_solver, q_start_lph=0.8, tolerance=1e-15))
    assert 0.0 < report.diagnostics["min_step_factor"] <= short_solver.step_max_factor


def test_time_to_zero_ratio_is_the_start_of_the_grid(params, short_solver):
    report = solve_deterministic(params, dataclasses.replace(short_solver, q_start_lph=0.8, max_iterations=1))
    assert report.time_to_ratio(0.0) == report.time_grid[0]
    assert report.time_to_ratio() > report.time_grid[0]


def _flow_between(report, start_hr, end_hr):
    t = report.time_grid
    return report.control.flow_lph[(t >= start_hr) & (t <= end_hr)]


@pytest.mark.slow
def test_default_run_reaches_the_reference_optimum(default_deterministic_report):
    report = default_deterministic_report
    assert report.converged
    assert report.diagnostics["max_abs_projected_dhdq"] < 1e-9

    dip = _flow_between(report, 40.0, 70.0)
    assert dip.min() == pytest.approx(0.54, abs=0.08)
    assert _flow_between(report, 0.0, 40.0).max() > dip.min()
    plateau = np.median(_flow_between(report, 200.0, 300.0))
    assert plateau == pytest.approx(0.67, abs=0.10)
    assert plateau > dip.min()

    assert report.time_to_ratio() == pytest.approx(211.0, rel=0.15)
    assert report.volume_processed_l() == pytest.approx(128.0, rel=0.15)
    assert report.mass_removed_per_resin() == pytest.approx(0.234, rel=0.15)


@pytest.mark.slow
def test_converged_control_ignores_skewness_mode(params):
    exact = solve_deterministic(params, SolverConfig(moment_mode="exact"))
    faithful = solve_deterministic(params, SolverConfig(moment_mode="paper_faithful"))
    assert exact.converged and faithful.converged
    assert_allclose(exact.control.flow_lph, faithful.control.flow_lph, rtol=0, atol=1e-12)
