"""Parameter-uncertainty ensembles of moment trajectories."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.stats import truncnorm

from ..errors import ChromateControlError
from ..model.schedule import ControlTrajectory
from ..model.thomas import ProcessParams, breakthrough_ratio
from ..moments.dynamics import integrate_moments
from ..utils.parallel import map_ordered

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("uniform", "truncated_normal")
DIFFUSION_MODES = ("tabulated", "state_proportional")

# Substream keys under one seed.
STREAM_PARAMETERS = 0
STREAM_PATHS = 1
STREAM_REVERTING = 2

TRUNCATION_SIGMAS = 2.0


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass
class UncertaintySpec:
    """Relative parameter widths, sampling and Ito path settings."""

    rel_width_c0: float = 0.10
    rel_width_kt: float = 0.30
    rel_width_qm: float = 0.30
    distribution: str = "uniform"
    sample_count: int = 100
    seed: int = 0
    shared_noise: bool = True
    noise_scale: float = 1.0
    smoothing_window: int = 5
    eta_speed: float = 1.9  # 1/hr
    n_paths: int = 100
    diffusion_mode: str = "tabulated"
    diffusion_coeffs: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    mc_runs: int = 100

    def validate(self) -> List[str]:
        errors = []
        for name in ("rel_width_c0", "rel_width_kt", "rel_width_qm"):
            width = getattr(self, name)
            if not 0.0 <= width < 1.0:
                errors.append(f"uncertainty.{name}: must lie in [0, 1), got {width}")
        if self.distribution not in DISTRIBUTIONS:
            errors.append(f"uncertainty.distribution: expected one of {DISTRIBUTIONS}, got {self.distribution!r}")
        if self.sample_count < 2:
            errors.append("uncertainty.sample_count: must be >= 2")
        if self.seed < 0:
            errors.append("uncertainty.seed: must be >= 0")
        if not self.noise_scale > 0:
            errors.append("uncertainty.noise_scale: must be > 0")
        if self.smoothing_window < 1:
            errors.append("uncertainty.smoothing_window: must be >= 1")
        if not self.eta_speed > 0:
            errors.append("uncertainty.eta_speed: must be > 0")
        if self.n_paths < 1:
            errors.append("uncertainty.n_paths: must be >= 1")
        if self.diffusion_mode not in DIFFUSION_MODES:
            errors.append(f"uncertainty.diffusion_mode: expected one of {DIFFUSION_MODES}")
        if len(self.diffusion_coeffs) != 4 or any(c < 0 for c in self.diffusion_coeffs):
            errors.append("uncertainty.diffusion_coeffs: need four values >= 0")
        if self.mc_runs < 2:
            errors.append("uncertainty.mc_runs: must be >= 2")
        return errors


@dataclass
class EnsembleStats:
    """Pointwise envelope and increment variance of the sampled trajectories."""

    time_grid: np.ndarray
    minimum: np.ndarray  # (n, 4)
    mean: np.ndarray
    maximum: np.ndarray
    var_increment: np.ndarray  # (n, 4); row k is var(y[k+1] - y[k]), last row repeated
    samples: np.ndarray  # (s, n, 4)
    failed: List[int] = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    @property
    def dt_hr(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0])

    def contains(self, states: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """Pointwise containment of a (n, 4) trajectory in [min, max], with a relative slack."""
        slack = rtol * np.maximum(np.abs(self.minimum), np.abs(self.maximum))
        return (states >= self.minimum - slack) & (states <= self.maximum + slack)


def _factor(u: float, width: float, distribution: str) -> float:
    if distribution == "uniform":
        return 1.0 + width * (2.0 * u - 1.0)
    return 1.0 + 0.5 * width * float(truncnorm.ppf(u, -TRUNCATION_SIGMAS, TRUNCATION_SIGMAS))


def sample_parameters(base: ProcessParams, spec: UncertaintySpec, draw_index: int) -> ProcessParams:
    """Perturbed copy of ``base`` for one ensemble member.

    C0 and q_m are scaled, and K_T gets a multiplier on the correlation's
    output. Draws come from a substream keyed by ``draw_index``, so a
    member is reproducible on its own.
    """
    u_c0, u_kt, u_qm = substream(spec.seed, STREAM_PARAMETERS, draw_index).random(3)
    return dataclasses.replace(
        base,
        c0_ppb=base.c0_ppb * _factor(u_c0, spec.rel_width_c0, spec.distribution),
        kt_multiplier=base.kt_multiplier * _factor(u_kt, spec.rel_width_kt, spec.distribution),
        qm_g_per_l=base.qm_g_per_l * _factor(u_qm, spec.rel_width_qm, spec.distribution),
    )


def _integrate_member(task) -> Optional[np.ndarray]:
    params, control, mode, index = task
    try:
        y1_init = float(breakthrough_ratio(params, control.flow_lph[0], 0.0))
        return integrate_moments(params, control, y1_init, mode).states
    except ChromateControlError as exc:
        logger.warning(f"Ensemble member {index} aborted: {exc}")
        return None


def ensemble_moments(
    base: ProcessParams,
    spec: UncertaintySpec,
    control: ControlTrajectory,
    mode: str = "exact",
    jobs: int = 1,
) -> EnsembleStats:
    """Integrate one moment trajectory per sampled parameter set and aggregate.

    Args:
        base: Nominal parameters
        spec: Widths, distribution, sample count and seed
        control: Flow schedule shared by all members
        mode: Moment ODE variant
        jobs: Worker processes

    Returns:
        EnsembleStats over the members that completed
    """
    tasks = [(sample_parameters(base, spec, i), control, mode, i) for i in range(spec.sample_count)]
    results = map_ordered(_integrate_member, tasks, jobs)

    failed = [i for i, states in enumerate(results) if states is None]
    kept = [states for states in results if states is not None]
    if len(kept) < 2:
        raise ChromateControlError(f"Ensemble has {len(kept)} usable members of {spec.sample_count}")
    if failed:
        logger.warning(f"{len(failed)} of {spec.sample_count} ensemble members excluded")

    samples = np.stack(kept)
    increments = np.diff(samples, axis=1)
    var_increment = np.var(increments, axis=0, ddof=1)
    var_increment = np.vstack([var_increment, var_increment[-1:]])

    logger.info(f"Ensemble: {samples.shape[0]} members on {samples.shape[1]} grid points")
    return EnsembleStats(
        time_grid=control.time_grid.copy(),
        minimum=samples.min(axis=0),
        mean=samples.mean(axis=0),
        maximum=samples.max(axis=0),
        var_increment=var_increment,
        samples=samples,
        failed=failed,
    )


def estimate_diffusion(stats: EnsembleStats, dt_hr: Optional[float] = None, smoothing_window: int = 5) -> np.ndarray:
    """Diffusion tables g_i(t) = sqrt(var(dy_i)/dt), optionally moving-averaged.

    Returns:
        Array (n, 4) in moment units per sqrt(hr)
    """
    dt = stats.dt_hr if dt_hr is None else dt_hr
    g = np.sqrt(stats.var_increment / dt)
    if smoothing_window > 1:
        g = uniform_filter1d(g, size=smoothing_window, axis=0, mode="nearest")
    # The running sum in the filter can leave -1e-34 residue on flat tables.
    return np.maximum(g, 0.0)
