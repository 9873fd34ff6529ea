"""Ito processes for moment trajectories: Brownian motion with drift and mean reversion.

Both are stepped with Euler-Maruyama on a uniform grid,

    x_k = x_{k-1} + a(x_{k-1}, t_{k-1}) dt + b(t_{k-1}) eps sqrt(dt)

with eps ~ N(0, noise_scale^2).
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..errors import ConfigError
from .sampling import STREAM_PATHS, STREAM_REVERTING, EnsembleStats, substream

logger = logging.getLogger(__name__)


@dataclass
class ItoSpec:
    """Brownian motion with time-tabulated drift F(t) and diffusion g(t)."""

    drift: np.ndarray  # per grid point, units/hr
    diffusion: np.ndarray  # per grid point, units/sqrt(hr)
    dt_hr: float
    seed: int = 0
    noise_scale: float = 1.0
    stream: int = STREAM_PATHS

    def __post_init__(self):
        self.drift = np.asarray(self.drift, dtype=float)
        self.diffusion = np.asarray(self.diffusion, dtype=float)
        errors = []
        if not self.dt_hr > 0:
            errors.append("ito.dt_hr: must be > 0")
        if np.any(self.diffusion < 0):
            errors.append("ito.diffusion: must be >= 0 pointwise")
        if errors:
            raise ConfigError(errors)


@dataclass
class MeanRevertingSpec:
    """Mean reversion toward a tabulated mean at speed eta."""

    eta_speed: float  # 1/hr
    reverting_mean: np.ndarray
    sigma_noise: np.ndarray
    dt_hr: float
    seed: int = 0
    noise_scale: float = 1.0
    stream: int = STREAM_REVERTING

    def __post_init__(self):
        self.reverting_mean = np.asarray(self.reverting_mean, dtype=float)
        self.sigma_noise = np.asarray(self.sigma_noise, dtype=float)
        errors = []
        if not self.eta_speed > 0:
            errors.append("mean_reverting.eta_speed: must be > 0")
        if not self.dt_hr > 0:
            errors.append("mean_reverting.dt_hr: must be > 0")
        if np.any(self.sigma_noise < 0):
            errors.append("mean_reverting.sigma_noise: must be >= 0")
        if errors:
            raise ConfigError(errors)
        if self.eta_speed * self.dt_hr > 1.0:
            logger.warning(
                f"eta*dt = {self.eta_speed * self.dt_hr:.3g} > 1: mean-reverting steps overshoot the mean"
            )


def _check_grid(grid: np.ndarray, dt_hr: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.allclose(np.diff(grid), dt_hr, rtol=1e-9, atol=0.0):
        raise ConfigError([f"grid: must be uniform with spacing dt = {dt_hr}"])
    return grid


def _table(values: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=float), (n,))


def standard_normal(seed: int, stream: int, shape, noise_scale: float = 1.0) -> np.ndarray:
    """Seeded eps draws, shape ``shape``, standard deviation ``noise_scale``."""
    return noise_scale * substream(seed, stream).standard_normal(shape)


def ito_brownian_drift_paths(spec: ItoSpec, x0: float, grid: np.ndarray, n_paths: int) -> np.ndarray:
    """A family of Brownian-with-drift paths, shape (n_paths, n)."""
    grid = _check_grid(grid, spec.dt_hr)
    n = grid.size
    drift = _table(spec.drift, n)
    diffusion = _table(spec.diffusion, n)
    eps = standard_normal(spec.seed, spec.stream, (n_paths, n - 1), spec.noise_scale)
    return _euler_maruyama(drift, diffusion, eps, np.full(n_paths, float(x0)), spec.dt_hr)


def ito_brownian_drift_path(spec: ItoSpec, x0: float, grid: np.ndarray) -> np.ndarray:
    """Single Brownian-with-drift path x_k = x_{k-1} + F dt + g eps sqrt(dt)."""
    return ito_brownian_drift_paths(spec, x0, grid, 1)[0]


def _euler_maruyama(drift, diffusion, eps, x0, dt) -> np.ndarray:
    n_paths, steps = eps.shape
    root_dt = np.sqrt(dt)
    paths = np.empty((n_paths, steps + 1))
    paths[:, 0] = x0
    x = paths[:, 0].copy()
    for k in range(1, steps + 1):
        x = x + drift[k - 1] * dt + diffusion[k - 1] * eps[:, k - 1] * root_dt
        paths[:, k] = x
    return paths


def ito_mean_reverting_paths(spec: MeanRevertingSpec, x0: float, grid: np.ndarray, n_paths: int) -> np.ndarray:
    """A family of mean-reverting paths, shape (n_paths, n)."""
    grid = _check_grid(grid, spec.dt_hr)
    n = grid.size
    mean = _table(spec.reverting_mean, n)
    sigma = _table(spec.sigma_noise, n)
    eps = standard_normal(spec.seed, spec.stream, (n_paths, n - 1), spec.noise_scale)
    root_dt = np.sqrt(spec.dt_hr)

    paths = np.empty((n_paths, n))
    x = np.full(n_paths, float(x0))
    paths[:, 0] = x
    for k in range(1, n):
        x = x + spec.eta_speed * (mean[k - 1] - x) * spec.dt_hr + sigma[k - 1] * eps[:, k - 1] * root_dt
        paths[:, k] = x
    return paths


def ito_mean_reverting_path(spec: MeanRevertingSpec, x0: float, grid: np.ndarray) -> np.ndarray:
    """Single path x_k - x_{k-1} = eta (mu_k-1 - x_{k-1}) dt + sigma eps sqrt(dt)."""
    return ito_mean_reverting_paths(spec, x0, grid, 1)[0]


def reversion_drift_equivalent(recent_path: np.ndarray, grid: np.ndarray) -> float:
    """Average slope of the recent path, standing in for eta*(mu - x) as a drift."""
    x = np.asarray(recent_path, dtype=float)
    t = np.asarray(grid, dtype=float)
    if x.size < 2 or x.size != t.size:
        raise ValueError("reversion_drift_equivalent needs >= 2 aligned points")
    return float((x[-1] - x[0]) / (t[-1] - t[0]))


def reversion_drift_series(path: np.ndarray, grid: np.ndarray, window: int = 2) -> np.ndarray:
    """Drift equivalent over a sliding window of ``window`` points, one value per window start."""
    x = np.asarray(path, dtype=float)
    t = np.asarray(grid, dtype=float)
    lag = window - 1
    return (x[lag:] - x[:-lag]) / (t[lag:] - t[:-lag])


def moment_path_families(stats: EnsembleStats, diffusion: np.ndarray, spec) -> Dict[str, np.ndarray]:
    """Ito path families for the four moments driven by ensemble statistics.

    mu0, mu1 and mu2c follow Brownian motion with the ensemble-mean drift;
    mu3c reverts to the ensemble-mean skewness at ``spec.eta_speed``. With
    shared noise one eps stream drives all four moments.

    Args:
        stats: Ensemble statistics on a uniform grid
        diffusion: Diffusion tables (n, 4)
        spec: UncertaintySpec (seed, n_paths, shared_noise, noise_scale, eta_speed)

    Returns:
        Dict of ``mu0, mu1, mu2c, mu3c`` -> (n_paths, n) arrays
    """
    grid = stats.time_grid
    dt = stats.dt_hr
    drift = np.diff(stats.mean, axis=0) / dt
    drift = np.vstack([drift, drift[-1:]])
    names = ("mu0", "mu1", "mu2c", "mu3c")

    families = {}
    for i, name in enumerate(names):
        stream = STREAM_PATHS if spec.shared_noise else STREAM_PATHS + 10 * (i + 1)
        if name == "mu3c":
            reverting = MeanRevertingSpec(
                eta_speed=spec.eta_speed,
                reverting_mean=stats.mean[:, i],
                sigma_noise=diffusion[:, i],
                dt_hr=dt,
                seed=spec.seed,
                noise_scale=spec.noise_scale,
                stream=stream,
            )
            families[name] = ito_mean_reverting_paths(reverting, stats.mean[0, i], grid, spec.n_paths)
        else:
            ito = ItoSpec(drift[:, i], diffusion[:, i], dt, spec.seed, spec.noise_scale, stream)
            families[name] = ito_brownian_drift_paths(ito, stats.mean[0, i], grid, spec.n_paths)
    return families


def containment_fraction(paths: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Share of (path, grid point) pairs inside [lower, upper]."""
    inside = (paths >= lower[None, :]) & (paths <= upper[None, :])
    return float(np.mean(inside))

