import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import pearsonr

from src.errors import ConfigError
from src.model.schedule import ControlTrajectory
from src.model.thomas import ProcessParams
from src.uncertainty.ito import (
    ItoSpec,
    MeanRevertingSpec,
    containment_fraction,
    ito_brownian_drift_path,
    ito_brownian_drift_paths,
    ito_mean_reverting_path,
    ito_mean_reverting_paths,
    moment_path_families,
    reversion_drift_equivalent,
    reversion_drift_series,
    standard_normal,
)
from src.uncertainty.sampling import EnsembleStats, UncertaintySpec, ensemble_moments, estimate_diffusion


def uniform_grid(n, dt):
    return np.arange(n) * dt


def test_standard_normal_draws():
    eps = standard_normal(seed=4, stream=1, shape=1_000_000)
    assert abs(eps.mean()) < 5e-3
    assert eps.std() == pytest.approx(1.0, abs=5e-3)
    assert_allclose(standard_normal(4, 1, 10, noise_scale=2.0), 2.0 * standard_normal(4, 1, 10))


def test_wiener_variance_grows_linearly():
    dt, n = 0.1, 101
    spec = ItoSpec(drift=np.zeros(n), diffusion=np.ones(n), dt_hr=dt, seed=3)
    paths = ito_brownian_drift_paths(spec, 0.0, uniform_grid(n, dt), n_paths=10_000)
    assert paths.shape == (10_000, n)
    assert np.var(paths[:, -1]) == pytest.approx(10.0, rel=0.05)
    assert np.var(paths[:, 50]) == pytest.approx(5.0, rel=0.05)


def test_zero_diffusion_is_drift_cumsum():
    dt, n = 0.5, 40
    drift = np.sin(np.arange(n))
    path = ito_brownian_drift_path(ItoSpec(drift, np.zeros(n), dt), 2.0, uniform_grid(n, dt))
    expected = 2.0 + np.concatenate([[0.0], np.cumsum(drift[:-1] * dt)])
    assert_allclose(path, expected)


def test_same_seed_same_paths():
    dt, n = 0.1, 50
    spec = ItoSpec(np.ones(n), np.full(n, 0.3), dt, seed=9)
    first = ito_brownian_drift_paths(spec, 0.0, uniform_grid(n, dt), 5)
    second = ito_brownian_drift_paths(spec, 0.0, uniform_grid(n, dt), 5)
    assert_allclose(first, second, rtol=0, atol=0)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ItoSpec(np.zeros(3), -np.ones(3), 0.1)
    with pytest.raises(ConfigError):
        MeanRevertingSpec(eta_speed=0.0, reverting_mean=np.zeros(3), sigma_noise=np.zeros(3), dt_hr=0.1)
    spec = ItoSpec(np.zeros(3), np.zeros(3), 0.1)
    with pytest.raises(ConfigError):
        ito_brownian_drift_path(spec, 0.0, np.array([0.0, 0.1, 0.3]))


def test_mean_reverting_without_noise_decays_geometrically():
    dt, n, eta = 0.1, 30, 1.9
    spec = MeanRevertingSpec(eta, np.zeros(n), np.zeros(n), dt)
    path = ito_mean_reverting_path(spec, 5.0, uniform_grid(n, dt))
    assert_allclose(path, 5.0 * (1.0 - eta * dt) ** np.arange(n))


def test_mean_reverting_warns_on_overshoot(caplog):
    with caplog.at_level(logging.WARNING):
        MeanRevertingSpec(1.9, np.zeros(3), np.zeros(3), dt_hr=1.0)
    assert "overshoot" in caplog.text


def test_drift_equivalent():
    t = uniform_grid(11, 0.5)
    assert reversion_drift_equivalent(np.full(11, 3.0), t) == 0.0
    assert reversion_drift_equivalent(2.0 * t + 1.0, t) == pytest.approx(2.0)
    assert_allclose(reversion_drift_series(2.0 * t + 1.0, t, window=3), 2.0)
    with pytest.raises(ValueError):
        reversion_drift_equivalent(np.ones(1), t[:1])


def test_drift_equivalent_tracks_reversion_term():
    dt, n, eta = 0.01, 301, 1.9
    spec = MeanRevertingSpec(eta, np.zeros(n), np.full(n, 0.01), dt, seed=2)
    grid = uniform_grid(n, dt)
    path = ito_mean_reverting_path(spec, 5.0, grid)
    series = reversion_drift_series(path, grid)
    r, _ = pearsonr(series, eta * (0.0 - path[:-1]))
    assert r > 0.9


def synthetic_stats(n=201, dt=0.5, members=5, seed=0):
    rng = np.random.default_rng(seed)
    t = uniform_grid(n, dt)
    base = np.stack([1.0 - np.exp(-t / 50.0), 0.4 * t, 10.0 * t, np.full(n, 0.2)], axis=1)
    samples = base[None] * (1.0 + 0.05 * rng.standard_normal((members, 1, 4)))
    increments = np.var(np.diff(samples, axis=1), axis=0, ddof=1)
    return EnsembleStats(
        time_grid=t,
        minimum=samples.min(axis=0),
        mean=samples.mean(axis=0),
        maximum=samples.max(axis=0),
        var_increment=np.vstack([increments, increments[-1:]]),
        samples=samples,
    )


def test_path_families_without_noise_follow_ensemble_mean():
    stats = synthetic_stats()
    families = moment_path_families(stats, np.zeros((stats.time_grid.size, 4)), UncertaintySpec(n_paths=3))
    assert set(families) == {"mu0", "mu1", "mu2c", "mu3c"}
    for i, name in enumerate(("mu0", "mu1", "mu2c")):
        assert families[name].shape == (3, stats.time_grid.size)
        assert_allclose(families[name][0], stats.mean[:, i], rtol=1e-9, atol=1e-9)
    assert_allclose(families["mu3c"], stats.mean[0, 3], rtol=1e-12)


def test_shared_noise_switch_changes_paths():
    stats = synthetic_stats()
    g = np.full((stats.time_grid.size, 4), 0.1)
    shared = moment_path_families(stats, g, UncertaintySpec(n_paths=2, seed=5, shared_noise=True))
    separate = moment_path_families(stats, g, UncertaintySpec(n_paths=2, seed=5, shared_noise=False))
    again = moment_path_families(stats, g, UncertaintySpec(n_paths=2, seed=5, shared_noise=True))
    assert not np.allclose(shared["mu1"], separate["mu1"])
    assert_allclose(shared["mu1"], again["mu1"], rtol=0, atol=0)
    # equal g on one eps stream: the noise cancels between moments
    gap = np.diff(shared["mu0"], axis=1) - np.diff(shared["mu1"], axis=1)
    assert_allclose(gap[0], gap[1], rtol=0, atol=1e-12)


def test_skewness_paths_stay_near_reverting_mean():
    stats = synthetic_stats()
    g = np.full((stats.time_grid.size, 4), 0.01)
    paths = moment_path_families(stats, g, UncertaintySpec(n_paths=50, seed=1))["mu3c"]
    lower = stats.mean[:, 3] - 0.05
    upper = stats.mean[:, 3] + 0.05
    assert containment_fraction(paths, lower, upper) >= 0.95


def test_containment_fraction():
    paths = np.array([[0.0, 1.0, 2.0], [0.0, 5.0, 2.0]])
    assert containment_fraction(paths, np.zeros(3), np.full(3, 2.0)) == pytest.approx(5 / 6)


def test_reverting_skewness_stays_inside_sampled_envelope():
    params = ProcessParams()
    control = ControlTrajectory.constant(params, 0.42, 300.0, 1000)
    spec = UncertaintySpec(sample_count=100, n_paths=20, eta_speed=1.9, seed=0)
    stats = ensemble_moments(params, spec, control)
    paths = moment_path_families(stats, estimate_diffusion(stats), spec)["mu3c"]
    assert containment_fraction(paths, stats.minimum[:, 3], stats.maximum[:, 3]) >= 0.95
