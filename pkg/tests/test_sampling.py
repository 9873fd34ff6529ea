import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.control.stochastic import DiffusionModel
from src.model.schedule import ControlTrajectory
from src.model.thomas import breakthrough_ratio, half_time
from src.moments.dynamics import integrate_moments
from src.uncertainty.sampling import (
    UncertaintySpec,
    ensemble_moments,
    estimate_diffusion,
    sample_parameters,
    substream,
)

FLAT = UncertaintySpec(rel_width_c0=0.0, rel_width_kt=0.0, rel_width_qm=0.0, sample_count=4)


def control_for(params, flow=0.8, t_final=300.0, n_grid=500):
    return ControlTrajectory.constant(params, flow, t_final, n_grid)


def test_spec_validation():
    errors = UncertaintySpec(rel_width_kt=1.5, distribution="cauchy", sample_count=1).validate()
    assert any(e.startswith("uncertainty.rel_width_kt") for e in errors)
    assert any(e.startswith("uncertainty.distribution") for e in errors)
    assert any(e.startswith("uncertainty.sample_count") for e in errors)
    assert UncertaintySpec().validate() == []


def test_substreams_are_independent_and_reproducible():
    assert_allclose(substream(7, 0, 3).random(5), substream(7, 0, 3).random(5))
    assert not np.allclose(substream(7, 0, 3).random(5), substream(7, 0, 4).random(5))
    assert not np.allclose(substream(7, 0, 3).random(5), substream(8, 0, 3).random(5))


def test_zero_widths_return_nominal_parameters(params):
    assert sample_parameters(params, FLAT, 3) == params


@pytest.mark.parametrize("distribution", ["uniform", "truncated_normal"])
def test_sampled_factors_stay_within_widths(params, distribution):
    spec = UncertaintySpec(distribution=distribution)
    for i in range(50):
        drawn = sample_parameters(params, spec, i)
        assert abs(drawn.c0_ppb / params.c0_ppb - 1.0) <= spec.rel_width_c0
        assert abs(drawn.kt_multiplier - 1.0) <= spec.rel_width_kt
        assert abs(drawn.qm_g_per_l / params.qm_g_per_l - 1.0) <= spec.rel_width_qm
        assert drawn.q_min_lph == params.q_min_lph


def test_draws_depend_on_index_only(params):
    spec = UncertaintySpec(seed=21)
    assert sample_parameters(params, spec, 5) == sample_parameters(params, dataclasses.replace(spec, sample_count=7), 5)
    assert sample_parameters(params, spec, 5) != sample_parameters(params, spec, 6)


def test_flat_ensemble_collapses_onto_nominal_trajectory(params):
    control = control_for(params)
    stats = ensemble_moments(params, FLAT, control)
    nominal = integrate_moments(params, control, breakthrough_ratio(params, 0.8, 0.0)).states
    assert stats.sample_count == 4
    assert_allclose(stats.minimum, nominal)
    assert_allclose(stats.maximum, nominal)
    assert_allclose(stats.var_increment, 0.0)
    assert_allclose(estimate_diffusion(stats), 0.0)


def test_envelope_widens_with_concentration_width(params):
    control = control_for(params)
    only_c0 = UncertaintySpec(rel_width_kt=0.0, rel_width_qm=0.0, sample_count=20, seed=3)
    narrow = ensemble_moments(params, dataclasses.replace(only_c0, rel_width_c0=0.05), control)
    wide = ensemble_moments(params, dataclasses.replace(only_c0, rel_width_c0=0.10), control)
    spread_narrow = narrow.maximum[:, 0] - narrow.minimum[:, 0]
    spread_wide = wide.maximum[:, 0] - wide.minimum[:, 0]
    assert spread_wide[-1] > 1.5 * spread_narrow[-1]
    assert np.sum(spread_wide) > np.sum(spread_narrow)


def test_ensemble_is_reproducible_across_jobs(params):
    control = control_for(params)
    spec = UncertaintySpec(sample_count=4, seed=8)
    serial = ensemble_moments(params, spec, control, jobs=1)
    parallel = ensemble_moments(params, spec, control, jobs=2)
    assert_allclose(serial.samples, parallel.samples, rtol=0, atol=0)


def test_nominal_trajectory_inside_large_ensemble(params):
    control = control_for(params)
    stats = ensemble_moments(params, UncertaintySpec(sample_count=100, seed=0), control)
    nominal = integrate_moments(params, control, breakthrough_ratio(params, 0.8, 0.0)).states
    inside = stats.contains(nominal)
    assert np.all(inside[:, 0])
    assert np.mean(inside[:, :3]) > 0.95


def test_estimate_diffusion_units_and_smoothing(params):
    control = control_for(params)
    stats = ensemble_moments(params, UncertaintySpec(sample_count=6, seed=1), control)
    raw = estimate_diffusion(stats, smoothing_window=1)
    assert raw.shape == stats.mean.shape
    assert_allclose(raw, np.sqrt(stats.var_increment / stats.dt_hr))
    smooth = estimate_diffusion(stats, smoothing_window=5)
    assert np.all(smooth >= 0.0)
    assert np.sum(np.abs(np.diff(smooth[:, 1]))) <= np.sum(np.abs(np.diff(raw[:, 1]))) + 1e-12


def test_smoothed_diffusion_of_flat_ensemble_is_never_negative(params):
    stats = ensemble_moments(params, FLAT, control_for(params, flow=0.42))
    g_table = estimate_diffusion(stats, smoothing_window=5)
    assert np.all(g_table >= 0.0)
    model = DiffusionModel(g_table, np.zeros(4))
    assert not model.state_dependent


def test_concentration_diffusion_peaks_near_half_time(params):
    flow = 1.27
    stats = ensemble_moments(params, UncertaintySpec(sample_count=40, seed=2), control_for(params, flow=flow))
    g1 = estimate_diffusion(stats)[:, 0]
    t_peak = stats.time_grid[int(np.argmax(g1))]
    t_half = float(half_time(params, flow))
    assert 0.5 * t_half < t_peak < 1.5 * t_half
    assert g1.max() > g1[0]
    assert g1.max() > g1[-1]
