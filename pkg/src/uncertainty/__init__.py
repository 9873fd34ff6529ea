"""Parameter ensembles, Ito path simulation and diffusion estimation."""

from .ito import (
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
from .sampling import (
    DIFFUSION_MODES,
    DISTRIBUTIONS,
    EnsembleStats,
    UncertaintySpec,
    ensemble_moments,
    estimate_diffusion,
    sample_parameters,
    substream,
)

__all__ = [
    "DIFFUSION_MODES",
    "DISTRIBUTIONS",
    "EnsembleStats",
    "ItoSpec",
    "MeanRevertingSpec",
    "UncertaintySpec",
    "containment_fraction",
    "ensemble_moments",
    "estimate_diffusion",
    "ito_brownian_drift_path",
    "ito_brownian_drift_paths",
    "ito_mean_reverting_path",
    "ito_mean_reverting_paths",
    "moment_path_families",
    "reversion_drift_equivalent",
    "reversion_drift_series",
    "sample_parameters",
    "standard_normal",
    "substream",
]
