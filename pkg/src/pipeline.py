"""Scenario runner: dispatches a run mode and writes its artifacts."""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.stats import pearsonr

from . import __version__
from .config import ScenarioConfig, config_hash, serialize_config
from .control.comparison import mc_deterministic_comparison
from .control.solver import FlowRateOptimizer, SolveReport, solve_deterministic
from .control.stochastic import diffusion_from_ensemble, solve_stochastic
from .errors import EXIT_OK, EXIT_UNCONVERGED, ChromateControlError
from .model.schedule import ControlTrajectory
from .model.thomas import (
    breakthrough_rate,
    breakthrough_ratio,
    contact_time_min,
    half_time,
    kt_from_conditions,
    operating_point,
    time_to_ratio_constant,
)
from .moments.dynamics import MomentTrajectory, integrate_moments
from .moments.metrics import OBJECTIVE_WEIGHTS, hetp_tpn, objective_time, objective_trajectory
from .moments.quadrature import calibrate_truncation, moments_by_quadrature, variance_limit
from .uncertainty.ito import containment_fraction, moment_path_families, reversion_drift_series
from .uncertainty.sampling import EnsembleStats, ensemble_moments
from .utils.accounting import mass_removed_per_resin, time_to_ratio, volume_processed
from .utils.output_io import (
    ArtifactHeader,
    write_columns,
    write_csv,
    write_ensemble_csv,
    write_g_table_csv,
    write_history_csv,
    write_json,
    write_snapshots_csv,
    write_trajectory_csv,
)
from .utils.parallel import map_ordered

logger = logging.getLogger(__name__)

# Measured residence time (hr) and variance (hr^2) reported for the fast
# (q_max, CT 0.5 min) and slow (q_min, CT 1.5 min) columns.
MEASURED_MOMENTS = ((108.0, 3386.0), (318.0, 7150.0))

MOMENT_NAMES = ("mu0", "mu1", "mu2c", "mu3c")
C0_SCALES = (0.9, 1.0, 1.1)
Q_START_SCALES = (0.9, 1.1)


@dataclass
class RunOutcome:
    """Exit status and headline numbers of one run."""

    exit_code: int
    summary: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)


def _solve_variant(task) -> SolveReport:
    params, solver_config = task
    return solve_deterministic(params, solver_config)


class ScenarioRunner:
    """Runs one configured mode."""

    def __init__(self, config: ScenarioConfig, output_dir: Path):
        """Initialize runner with configuration.

        Args:
            config: Validated scenario
            output_dir: Directory for artifacts
        """
        self.config = config
        self.output_dir = Path(output_dir)
        self.header = ArtifactHeader(seed=config.seed, config_hash=config_hash(config), version=__version__)
        self.artifacts: List[Path] = []
        self.unconverged: List[str] = []

    def run(self) -> RunOutcome:
        """Dispatch the configured mode.

        Returns:
            RunOutcome with exit code 0, or 3 for an unconverged optimization
            unless unconverged runs are allowed
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._save(self.output_dir / "scenario.env", serialize_config(self.config))

        logger.info("=" * 60)
        logger.info(f"Running mode: {self.config.mode}")
        logger.info("=" * 60)

        handlers = {
            "simulate": self._simulate,
            "moments": self._moments,
            "optimize-det": self._optimize_deterministic,
            "optimize-stoch": self._optimize_stochastic,
            "ensemble": self._ensemble,
            "compare": self._compare,
            "mc-compare": self._mc_compare,
            "sensitivity": self._sensitivity,
        }
        summary = handlers[self.config.mode]()

        exit_code = EXIT_OK
        if self.unconverged:
            logger.warning(f"Unconverged optimizations: {', '.join(self.unconverged)}")
            if not self.config.allow_unconverged:
                exit_code = EXIT_UNCONVERGED
        return RunOutcome(exit_code=exit_code, summary=summary, artifacts=list(self.artifacts))

    # -- helpers -----------------------------------------------------------

    def _save(self, path: Path, text: str):
        path.write_text(text, encoding="utf-8", newline="\n")
        self.artifacts.append(path)

    def _csv(self, name: str, columns: Dict[str, Any]) -> Path:
        path = write_columns(self.output_dir / name, self.header, columns)
        self.artifacts.append(path)
        return path

    def _json(self, name: str, payload: Dict[str, Any]) -> Path:
        payload = {"seed": self.header.seed, "config_hash": self.header.config_hash, "version": __version__, **payload}
        path = write_json(self.output_dir / name, payload)
        self.artifacts.append(path)
        return path

    def _constant_control(self, flow_lph: float) -> ControlTrajectory:
        solver = self.config.solver
        return ControlTrajectory.constant(self.config.process, flow_lph, solver.t_final_hr, solver.n_grid)

    def _fixed_flow(self, flow_lph: float) -> MomentTrajectory:
        params = self.config.process
        control = self._constant_control(flow_lph)
        y1_init = float(breakthrough_ratio(params, flow_lph, 0.0))
        return integrate_moments(params, control, y1_init, self.config.solver.moment_mode)

    def _write_report(self, report: SolveReport, prefix: str) -> Dict[str, Any]:
        write_trajectory_csv(
            self.output_dir / f"{prefix}_trajectory.csv",
            self.header,
            report.trajectory,
            report.objective_curve,
            report.dhdq,
        )
        write_history_csv(self.output_dir / f"{prefix}_history.csv", self.header, report.history)
        self.artifacts += [self.output_dir / f"{prefix}_trajectory.csv", self.output_dir / f"{prefix}_history.csv"]
        self._csv(
            f"{prefix}_objective.csv",
            {"t_hr": report.time_grid, "J": report.objective_curve, "H": report.hamiltonian},
        )
        if report.snapshots:
            path = write_snapshots_csv(
                self.output_dir / f"{prefix}_flow_snapshots.csv", self.header, report.time_grid, report.snapshots
            )
            self.artifacts.append(path)

        summary = report.summary()
        self._json(f"{prefix}_report.json", summary)
        if not report.converged:
            self.unconverged.append(prefix)
        self._log_summary(prefix, summary)
        return summary

    def _log_summary(self, label: str, summary: Dict[str, Any]):
        t14 = summary.get("time_to_target_hr")
        logger.info("-" * 60)
        logger.info(f"{label}: converged={summary['converged']} ({summary['stop_reason']}), "
                    f"iterations={summary['iterations']}")
        logger.info(f"  final flow: {summary['final_flow_lph']:.4f} L/hr   J(t_f): {summary['objective_final']:.6g}")
        logger.info(
            f"  time to {summary['target_ratio']:.0%}: {t14 if t14 is None else f'{t14:.2f} hr'}   "
            f"volume: {summary['volume_processed_l']:.2f} L   "
            f"removal: {summary['mass_removed_g_per_l_resin']:.4f} g/L resin"
        )
        logger.info("-" * 60)

    def _ensemble_diffusion(self, control: ControlTrajectory):
        cfg = self.config
        stats = ensemble_moments(cfg.process, cfg.uncertainty, control, cfg.solver.moment_mode, cfg.jobs)
        return stats, diffusion_from_ensemble(stats, cfg.uncertainty)

    def _skewness_drift(self, stats: EnsembleStats, path: np.ndarray) -> Optional[float]:
        """Drift equivalent of one mean-reverting mu3c path against eta*(mean - x).

        Writes ``mu3c_drift.csv`` and returns the correlation of the two series
        (None when either is flat).
        """
        grid = stats.time_grid
        equivalent = reversion_drift_series(path, grid)
        reverting = self.config.uncertainty.eta_speed * (stats.mean[:-1, 3] - path[:-1])
        self._csv(
            "mu3c_drift.csv",
            {"t_hr": grid[:-1], "x_0": path[:-1], "drift_equivalent": equivalent, "reversion_term": reverting},
        )
        if np.ptp(equivalent) == 0.0 or np.ptp(reverting) == 0.0:
            return None
        return float(pearsonr(equivalent, reverting)[0])

    # -- modes -------------------------------------------------------------

    def _simulate(self) -> Dict[str, Any]:
        """Constant flow at q_start: closed-form breakthrough and moment ODEs."""
        params, solver = self.config.process, self.config.solver
        flow = solver.q_start_lph
        trajectory = self._fixed_flow(flow)
        t = trajectory.time_grid
        curve = objective_trajectory(trajectory, params.c0_g_per_l)

        self._csv(
            "breakthrough.csv",
            {
                "t_hr": t,
                "Q_lph": trajectory.flow_lph,
                "psi": breakthrough_ratio(params, flow, t),
                "dpsi_dt": breakthrough_rate(params, flow, t),
            },
        )
        path = write_trajectory_csv(self.output_dir / "trajectory.csv", self.header, trajectory, curve)
        self.artifacts.append(path)

        t_target = time_to_ratio(t, trajectory.psi, solver.target_ratio)
        point = operating_point(params, flow, 0.0)
        summary = {
            "flow_lph": point.flow_lph,
            "contact_time_min": point.contact_time_min,
            "kt": point.kt_value,
            "t_half_hr": float(half_time(params, flow)),
            "time_to_target_hr": t_target,
            "time_to_target_closed_form_hr": time_to_ratio_constant(params, flow, solver.target_ratio),
            "volume_processed_l": volume_processed(t, trajectory.flow_lph, t_target),
            "mass_removed_g_per_l_resin": mass_removed_per_resin(
                t, trajectory.psi, trajectory.flow_lph, params.c0_g_per_l, params.resin_volume_l, t_target
            ),
            "final_state": trajectory.final.as_array(),
            "floor_events": trajectory.floor_events,
        }
        self._json("simulate.json", summary)
        logger.info(f"Simulated Q={flow} L/hr: time to {solver.target_ratio:.0%} = {t_target} hr")
        return summary

    def _moments(self) -> Dict[str, Any]:
        """Moment table for the two pump bounds against the measured moments."""
        params = self.config.process
        rows, entries = [], []
        for flow, (tm_measured, var_measured) in zip((params.q_max_lph, params.q_min_lph), MEASURED_MOMENTS):
            sigma = float(np.sqrt(var_measured))
            hetp, tpn = hetp_tpn(tm_measured, var_measured, params.column_height)
            try:
                t_end = calibrate_truncation(params, flow, var_measured)
                calibrated = moments_by_quadrature(params, flow, t_end)
            except ChromateControlError as exc:
                logger.warning(f"Truncation calibration failed at Q={flow}: {exc}")
                t_end, calibrated = None, None
            entry = {
                "flow_lph": flow,
                "contact_time_min": float(contact_time_min(params, flow)),
                "kt": kt_from_conditions(params, flow),
                "t_half_hr": float(half_time(params, flow)),
                "tm_measured_hr": tm_measured,
                "variance_measured_hr2": var_measured,
                "variance_limit_hr2": variance_limit(params, flow),
                "tpn": tpn,
                "hetp": hetp,
                "t_end_calibrated_hr": t_end,
                "mu1_calibrated_hr": calibrated.y2_mu1 if calibrated else None,
                "objective_times": [],
            }
            for weight in OBJECTIVE_WEIGHTS:
                t_obj = objective_time(tm_measured, sigma, weight)
                psi = float(breakthrough_ratio(params, flow, t_obj))
                entry["objective_times"].append({"weight": weight, "time_hr": t_obj, "psi": psi})
                rows.append(
                    (
                        flow,
                        entry["contact_time_min"],
                        entry["t_half_hr"],
                        tm_measured,
                        var_measured,
                        weight,
                        t_obj,
                        psi,
                        tpn,
                        hetp,
                        t_end,
                        entry["mu1_calibrated_hr"],
                    )
                )
            entries.append(entry)
            logger.info(
                f"Q={flow} L/hr: t_half={entry['t_half_hr']:.2f} hr (measured t_m {tm_measured}), "
                f"psi at objective times = {[round(o['psi'], 3) for o in entry['objective_times']]}"
            )

        path = write_csv(
            self.output_dir / "moments_table.csv",
            self.header,
            [
                "flow_lph",
                "ct_min",
                "t_half_hr",
                "tm_measured_hr",
                "var_measured_hr2",
                "weight",
                "objective_time_hr",
                "psi",
                "tpn",
                "hetp",
                "t_end_calibrated_hr",
                "mu1_calibrated_hr",
            ],
            rows,
        )
        self.artifacts.append(path)
        summary = {"columns": entries}
        self._json("moments.json", summary)
        return summary

    def _optimize_deterministic(self) -> Dict[str, Any]:
        report = solve_deterministic(self.config.process, self.config.solver)
        return self._write_report(report, "det")

    def _optimize_stochastic(self) -> Dict[str, Any]:
        cfg = self.config
        control = FlowRateOptimizer(cfg.process, cfg.solver).initial_control()
        _, diffusion = self._ensemble_diffusion(control)
        path = write_g_table_csv(self.output_dir / "g_table.csv", self.header, control.time_grid, diffusion.g_table)
        self.artifacts.append(path)
        report = solve_stochastic(cfg.process, cfg.uncertainty, cfg.solver, diffusion=diffusion)
        return self._write_report(report, "stoch")

    def _ensemble(self) -> Dict[str, Any]:
        """Parameter ensemble envelope, diffusion tables and Ito path families."""
        cfg = self.config
        control = self._constant_control(cfg.solver.q_start_lph)
        stats, diffusion = self._ensemble_diffusion(control)
        baseline = self._fixed_flow(cfg.solver.q_start_lph)

        path = write_ensemble_csv(self.output_dir / "ensemble.csv", self.header, stats)
        self.artifacts.append(path)
        path = write_g_table_csv(self.output_dir / "g_table.csv", self.header, stats.time_grid, diffusion.g_table)
        self.artifacts.append(path)

        inside = stats.contains(baseline.states)
        families = moment_path_families(stats, diffusion.g_table, cfg.uncertainty)
        path_containment = {}
        for i, name in enumerate(MOMENT_NAMES):
            paths = families[name]
            columns = {"t_hr": stats.time_grid}
            columns.update({f"x_{k}": paths[k] for k in range(paths.shape[0])})
            self._csv(f"paths_{name}.csv", columns)
            path_containment[name] = containment_fraction(paths, stats.minimum[:, i], stats.maximum[:, i])

        drift_correlation = self._skewness_drift(stats, families["mu3c"][0])

        summary = {
            "members": stats.sample_count,
            "failed": stats.failed,
            "baseline_containment": {name: float(np.mean(inside[:, i])) for i, name in enumerate(MOMENT_NAMES)},
            "path_containment": path_containment,
            "eta_speed": cfg.uncertainty.eta_speed,
            "eta_dt": cfg.uncertainty.eta_speed * stats.dt_hr,
            "mu3c_drift_correlation": drift_correlation,
        }
        self._json("ensemble.json", summary)
        logger.info(f"Baseline containment: {summary['baseline_containment']}")
        logger.info(f"Path containment: {path_containment}")
        return summary

    def _compare(self) -> Dict[str, Any]:
        """Fixed-fast, fixed-slow, deterministic and stochastic optimal policies side by side."""
        cfg = self.config
        params, solver = cfg.process, cfg.solver
        policies: Dict[str, Dict[str, Any]] = {}

        for name, flow in (("fixed_fast", params.q_max_lph), ("fixed_slow", params.q_min_lph)):
            try:
                trajectory = self._fixed_flow(flow)
                policies[name] = {"time_grid": trajectory.time_grid, "psi": trajectory.psi,
                                  "flow": trajectory.flow_lph, "converged": True}
            except ChromateControlError as exc:
                logger.error(f"Policy {name} failed: {exc}")
                policies[name] = {"error": str(exc)}

        for name in ("det_optimal", "stoch_optimal"):
            try:
                if name == "det_optimal":
                    report = solve_deterministic(params, solver)
                else:
                    report = solve_stochastic(params, cfg.uncertainty, solver, jobs=cfg.jobs)
                policies[name] = {"time_grid": report.time_grid, "psi": report.trajectory.psi,
                                  "flow": report.control.flow_lph, "converged": report.converged,
                                  "iterations": report.iterations}
                if not report.converged:
                    self.unconverged.append(name)
            except ChromateControlError as exc:
                logger.error(f"Policy {name} failed: {exc}")
                policies[name] = {"error": str(exc)}

        ratio = solver.target_ratio
        for entry in policies.values():
            if "error" in entry:
                continue
            entry["time_to_target_hr"] = time_to_ratio(entry["time_grid"], entry["psi"], ratio)

        det_time = policies.get("det_optimal", {}).get("time_to_target_hr")
        rows, table = [], {}
        for name, entry in policies.items():
            if "error" in entry:
                rows.append((name, None, None, None, None, None, False, entry["error"]))
                table[name] = {"error": entry["error"]}
                continue
            t, psi, flow = entry["time_grid"], entry["psi"], entry["flow"]
            t_own = entry["time_to_target_hr"]
            row = {
                "time_to_target_hr": t_own,
                "volume_l": volume_processed(t, flow, t_own),
                "removal_g_per_l": mass_removed_per_resin(
                    t, psi, flow, params.c0_g_per_l, params.resin_volume_l, t_own
                ),
                "converged": entry["converged"],
            }
            if det_time is not None:
                horizon = det_time if t_own is None else min(det_time, t_own)
                row["volume_at_det_time_l"] = volume_processed(t, flow, horizon)
                row["removal_at_det_time_g_per_l"] = mass_removed_per_resin(
                    t, psi, flow, params.c0_g_per_l, params.resin_volume_l, horizon
                )
            table[name] = row
            rows.append(
                (
                    name,
                    t_own,
                    row["volume_l"],
                    row["removal_g_per_l"],
                    row.get("volume_at_det_time_l"),
                    row.get("removal_at_det_time_g_per_l"),
                    row["converged"],
                    "",
                )
            )
            logger.info(
                f"{name:>14}: t({ratio:.0%})={t_own}  volume={row['volume_l']:.2f} L  "
                f"removal={row['removal_g_per_l']:.4f} g/L"
            )

        path = write_csv(
            self.output_dir / "compare_table.csv",
            self.header,
            [
                "policy",
                "time_to_target_hr",
                "volume_l",
                "removal_g_per_l",
                "volume_at_det_time_l",
                "removal_at_det_time_g_per_l",
                "converged",
                "error",
            ],
            rows,
        )
        self.artifacts.append(path)

        curves = {"t_hr": self._constant_control(params.q_min_lph).time_grid}
        curves.update({f"psi_{name}": e["psi"] for name, e in policies.items() if "error" not in e})
        self._csv("breakthrough_compare.csv", curves)

        summary = {"target_ratio": ratio, "policies": table}
        self._json("compare.json", summary)
        return summary

    def _mc_compare(self) -> Dict[str, Any]:
        cfg = self.config
        report = mc_deterministic_comparison(
            cfg.process, cfg.uncertainty, cfg.solver, cfg.uncertainty.mc_runs, jobs=cfg.jobs
        )
        self._csv(
            "mc_compare.csv",
            {
                "t_hr": report.time_grid,
                "det_min": report.det_min,
                "det_mean": report.det_mean,
                "det_max": report.det_max,
                "stoch_Q": report.stochastic.control.flow_lph,
            },
        )
        if not report.stochastic.converged:
            self.unconverged.append("stochastic")
        summary = report.summary()
        self._json("mc_compare.json", summary)
        return summary

    def _sensitivity(self) -> Dict[str, Any]:
        """Deterministic optima under scaled inlet concentration and starting flow."""
        cfg = self.config
        params, solver = cfg.process, cfg.solver
        variants: Dict[str, tuple] = {}
        for scale in C0_SCALES:
            variants[f"c0_x{scale:g}"] = (dataclasses.replace(params, c0_ppb=params.c0_ppb * scale), solver)
        for scale in Q_START_SCALES:
            q_start = solver.q_start_lph * scale
            clipped = float(np.clip(q_start, params.q_min_lph, params.q_max_lph))
            if clipped != q_start:
                logger.warning(f"Initial flow {q_start:.4g} L/hr clipped to pump bounds -> {clipped}")
            variants[f"qstart_x{scale:g}"] = (params, dataclasses.replace(solver, q_start_lph=clipped))

        names = list(variants)
        reports = map_ordered(_solve_variant, [variants[name] for name in names], cfg.jobs)

        columns = {"t_hr": reports[0].time_grid}
        summary = {}
        for name, report in zip(names, reports):
            columns[name] = report.control.flow_lph
            summary[name] = report.summary()
            if not report.converged:
                self.unconverged.append(name)
        self._csv("sensitivity.csv", columns)
        self._json("sensitivity.json", {"variants": summary})
        return {"variants": summary}


def run_scenario(config: ScenarioConfig, output_dir: Optional[Path] = None) -> RunOutcome:
    """Run the configured mode, writing artifacts under ``output_dir``."""
    target = output_dir or config.output_path
    if target is None:
        raise ValueError("run_scenario needs an output directory")
    return ScenarioRunner(config, Path(target)).run()


def run_compare(config: ScenarioConfig, output_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Policy comparison tables whatever mode ``config`` names.

    Returns:
        ``{"target_ratio": ..., "policies": {name: row}}``; a policy that
        failed carries ``{"error": message}`` instead of numbers
    """
    target = output_dir or config.output_path
    if target is None:
        raise ValueError("run_compare needs an output directory")
    runner = ScenarioRunner(dataclasses.replace(config, mode="compare"), Path(target))
    return runner.run().summary
