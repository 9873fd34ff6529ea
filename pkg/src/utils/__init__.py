"""Utility modules for artifact I/O, process accounting and worker fan-out."""

from .accounting import mass_removed_per_resin, time_to_ratio, volume_processed
from .output_io import (
    ArtifactHeader,
    convert_to_serializable,
    read_csv,
    write_columns,
    write_csv,
    write_ensemble_csv,
    write_g_table_csv,
    write_history_csv,
    write_json,
    write_snapshots_csv,
    write_trajectory_csv,
)
from .parallel import map_ordered

__all__ = [
    "ArtifactHeader",
    "convert_to_serializable",
    "map_ordered",
    "mass_removed_per_resin",
    "read_csv",
    "time_to_ratio",
    "volume_processed",
    "write_columns",
    "write_csv",
    "write_ensemble_csv",
    "write_g_table_csv",
    "write_history_csv",
    "write_json",
    "write_snapshots_csv",
    "write_trajectory_csv",
]
