"""CSV and JSON artifact writers.

Every CSV starts with ``# seed=``, ``# config_hash=`` and ``# version=``
comment lines, then a header row. Floats use 10 significant digits and
lines end in LF, so identical inputs give byte-identical files.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".10g"


@dataclass(frozen=True)
class ArtifactHeader:
    """Provenance recorded at the top of every CSV."""

    seed: int
    config_hash: str
    version: str

    def lines(self) -> List[str]:
        return [f"# seed={self.seed}", f"# config_hash={self.config_hash}", f"# version={self.version}"]


def convert_to_serializable(obj: Any) -> Any:
    """Convert numpy types to Python native types for JSON serialization.

    Non-finite floats become None so the output stays strict JSON.

    Args:
        obj: Object to convert

    Returns:
        JSON-serializable version of the object
    """
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    elif isinstance(obj, np.ndarray):
        return [convert_to_serializable(item) for item in obj.tolist()]
    elif isinstance(obj, Path):
        return str(obj)
    elif isinstance(obj, dict):
        return {str(key): convert_to_serializable(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_to_serializable(item) for item in obj]
    else:
        return obj


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: ArtifactHeader, columns: Sequence[str], rows) -> Path:
    """Write rows under the provenance header.

    Args:
        path: Output file
        header: Provenance block
        columns: Column names
        rows: Iterable of row sequences aligned with ``columns``

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for line in header.lines():
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([_format(value) for value in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def write_columns(path: Path, header: ArtifactHeader, columns: Mapping[str, Sequence[float]]) -> Path:
    """Write equal-length column arrays."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    return write_csv(path, header, names, zip(*arrays))


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(convert_to_serializable(payload), handle, indent=2, sort_keys=True, allow_nan=False)
        handle.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def read_csv(path: Path) -> Dict[str, Any]:
    """Read an artifact back as ``{"meta": {...}, "columns": [...], "rows": [[...]]}``."""
    meta, lines = {}, []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.startswith("# ") and "=" in line and not lines:
                key, value = line[2:].rstrip("\n").split("=", 1)
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return {"meta": meta, "columns": columns, "rows": [row for row in reader]}


def write_trajectory_csv(
    path: Path,
    header: ArtifactHeader,
    trajectory,
    objective_curve: np.ndarray,
    dhdq: Optional[np.ndarray] = None,
) -> Path:
    """Moment trajectory as ``t_hr, Q_lph, psi, mu1_hr, mu2c_hr2, mu3c, J[, dHdQ]``."""
    columns = {
        "t_hr": trajectory.time_grid,
        "Q_lph": trajectory.flow_lph,
        "psi": trajectory.psi,
        "mu1_hr": trajectory.mu1,
        "mu2c_hr2": trajectory.mu2c,
        "mu3c": trajectory.mu3c,
        "J": objective_curve,
    }
    if dhdq is not None:
        columns["dHdQ"] = dhdq
    return write_columns(path, header, columns)


def write_history_csv(path: Path, header: ArtifactHeader, history) -> Path:
    """Solver history as ``iter, max_dHdQ, J, H_mean, J_max``."""
    return write_columns(
        path,
        header,
        {
            "iter": history.iteration,
            "max_dHdQ": history.max_dhdq,
            "J": history.objective,
            "H_mean": history.hamiltonian_mean,
            "J_max": history.objective_at_target,
        },
    )


def write_snapshots_csv(path: Path, header: ArtifactHeader, time_grid: np.ndarray, snapshots) -> Path:
    """Flow schedule every few iterations as ``t_hr, iter_<k>...``."""
    columns = {"t_hr": time_grid}
    for snap in snapshots:
        columns[f"iter_{snap.iteration}"] = snap.flow_lph
    return write_columns(path, header, columns)


def write_ensemble_csv(path: Path, header: ArtifactHeader, stats) -> Path:
    """Envelope rows ``t_hr, moment_id, min, mean, max, var_increment``."""

    def rows():
        for k, t in enumerate(stats.time_grid):
            for moment in range(4):
                yield (
                    float(t),
                    moment,
                    stats.minimum[k, moment],
                    stats.mean[k, moment],
                    stats.maximum[k, moment],
                    stats.var_increment[k, moment],
                )

    return write_csv(path, header, ["t_hr", "moment_id", "min", "mean", "max", "var_increment"], rows())


def write_g_table_csv(path: Path, header: ArtifactHeader, time_grid: np.ndarray, g_table: np.ndarray) -> Path:
    return write_columns(
        path,
        header,
        {"t_hr": time_grid, "g1": g_table[:, 0], "g2": g_table[:, 1], "g3": g_table[:, 2], "g4": g_table[:, 3]},
    )
