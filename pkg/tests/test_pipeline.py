import dataclasses
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from main import main
from src.config import load_config
from src.model.thomas import breakthrough_ratio, contact_time_min, operating_point
from src.pipeline import ScenarioRunner, run_compare, run_scenario
from src.utils.output_io import read_csv


def with_mode(scenario, mode, **run):
    return dataclasses.replace(scenario, mode=mode, **run)


def column(table, name):
    index = table["columns"].index(name)
    return np.array([float(row[index]) for row in table["rows"]])


def test_simulate_writes_closed_form_breakthrough(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "simulate"), tmp_path)
    assert outcome.exit_code == 0
    table = read_csv(tmp_path / "breakthrough.csv")
    assert table["columns"] == ["t_hr", "Q_lph", "psi", "dpsi_dt"]
    assert table["meta"]["seed"] == str(scenario.seed)
    t = column(table, "t_hr")
    assert_allclose(column(table, "psi"), breakthrough_ratio(scenario.process, 0.42, t), rtol=1e-9)
    assert outcome.summary["time_to_target_hr"] == pytest.approx(234.13, rel=1e-2)
    assert (tmp_path / "trajectory.csv").is_file()
    assert load_config(tmp_path / "scenario.env") == dataclasses.replace(scenario, mode="simulate")

    point = operating_point(scenario.process, 0.42, 0.0)
    assert outcome.summary["contact_time_min"] == pytest.approx(contact_time_min(scenario.process, 0.42))
    assert outcome.summary["kt"] == pytest.approx(point.kt_value)


def test_moments_table(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "moments"), tmp_path)
    assert outcome.exit_code == 0
    table = read_csv(tmp_path / "moments_table.csv")
    assert len(table["rows"]) == 6
    assert_allclose(column(table, "psi"), [0.18, 0.32, 0.69, 0.14, 0.28, 0.70], atol=0.02)
    fast, slow = outcome.summary["columns"]
    assert fast["t_half_hr"] == pytest.approx(105.83, abs=0.01)
    assert slow["t_half_hr"] == pytest.approx(320.01, abs=0.01)
    assert slow["t_end_calibrated_hr"] is not None


def test_unconverged_optimization_exit_code(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "optimize-det"), tmp_path / "strict")
    assert outcome.exit_code == 3
    report = json.loads((tmp_path / "strict" / "det_report.json").read_text())
    assert report["converged"] is False
    assert report["iterations"] == 3

    allowed = run_scenario(with_mode(scenario, "optimize-det", allow_unconverged=True), tmp_path / "allowed")
    assert allowed.exit_code == 0
    history = read_csv(tmp_path / "allowed" / "det_history.csv")
    assert history["columns"] == ["iter", "max_dHdQ", "J", "H_mean", "J_max"]
    assert len(history["rows"]) == 3


def test_stochastic_optimization_writes_g_table(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "optimize-stoch", allow_unconverged=True), tmp_path)
    assert outcome.exit_code == 0
    g_table = read_csv(tmp_path / "g_table.csv")
    assert len(g_table["rows"]) == scenario.solver.n_grid + 1
    assert outcome.summary["method"] == "stochastic"


def test_ensemble_outputs(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "ensemble"), tmp_path)
    assert outcome.exit_code == 0
    ensemble = read_csv(tmp_path / "ensemble.csv")
    assert len(ensemble["rows"]) == 4 * (scenario.solver.n_grid + 1)
    paths = read_csv(tmp_path / "paths_mu1.csv")
    assert paths["columns"] == ["t_hr"] + [f"x_{k}" for k in range(scenario.uncertainty.n_paths)]
    assert outcome.summary["members"] == scenario.uncertainty.sample_count
    assert 0.0 <= outcome.summary["baseline_containment"]["mu0"] <= 1.0
    assert set(outcome.summary["path_containment"]) == {"mu0", "mu1", "mu2c", "mu3c"}
    drift = read_csv(tmp_path / "mu3c_drift.csv")
    assert drift["columns"] == ["t_hr", "x_0", "drift_equivalent", "reversion_term"]
    assert len(drift["rows"]) == scenario.solver.n_grid
    assert "mu3c_drift_correlation" in outcome.summary


def test_reruns_are_byte_identical(scenario, tmp_path):
    config = with_mode(scenario, "ensemble")
    first = run_scenario(config, tmp_path / "a")
    run_scenario(config, tmp_path / "b")
    for path in first.artifacts:
        twin = tmp_path / "b" / path.name
        assert path.read_bytes() == twin.read_bytes(), path.name


def test_compare_rows(scenario, tmp_path):
    summary = run_compare(with_mode(scenario, "simulate", allow_unconverged=True), tmp_path)
    assert set(summary["policies"]) == {"fixed_fast", "fixed_slow", "det_optimal", "stoch_optimal"}
    table = read_csv(tmp_path / "compare_table.csv")
    assert [row[0] for row in table["rows"]] == ["fixed_fast", "fixed_slow", "det_optimal", "stoch_optimal"]
    slow, fast = summary["policies"]["fixed_slow"], summary["policies"]["fixed_fast"]
    assert slow["time_to_target_hr"] == pytest.approx(234.13, rel=1e-2)
    assert fast["time_to_target_hr"] == pytest.approx(37.28, rel=1e-2)
    assert slow["removal_g_per_l"] > fast["removal_g_per_l"]
    curves = read_csv(tmp_path / "breakthrough_compare.csv")
    assert "psi_det_optimal" in curves["columns"]


def test_sensitivity_variants(scenario, tmp_path):
    outcome = run_scenario(with_mode(scenario, "sensitivity", allow_unconverged=True), tmp_path)
    assert set(outcome.summary["variants"]) == {"c0_x0.9", "c0_x1", "c0_x1.1", "qstart_x0.9", "qstart_x1.1"}
    table = read_csv(tmp_path / "sensitivity.csv")
    assert table["columns"][0] == "t_hr"
    assert len(table["columns"]) == 6


def test_mc_compare(scenario, tmp_path):
    config = dataclasses.replace(
        with_mode(scenario, "mc-compare", allow_unconverged=True),
        solver=dataclasses.replace(scenario.solver, tolerance=1e6),
    )
    outcome = run_scenario(config, tmp_path)
    assert outcome.exit_code == 0
    table = read_csv(tmp_path / "mc_compare.csv")
    assert table["columns"] == ["t_hr", "det_min", "det_mean", "det_max", "stoch_Q"]
    assert outcome.summary["members"] == scenario.uncertainty.mc_runs


def test_runner_records_artifacts(scenario, tmp_path):
    outcome = ScenarioRunner(with_mode(scenario, "simulate"), tmp_path).run()
    names = {path.name for path in outcome.artifacts}
    assert {"scenario.env", "breakthrough.csv", "trajectory.csv", "simulate.json"} <= names


def test_main_rejects_invalid_config(tmp_path):
    bad = tmp_path / "bad.env"
    bad.write_text("PROCESS__Q_MIN_LPH=1.5\nPROCESS__Q_MAX_LPH=1.0\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "out")]) == 2


def test_main_simulate(tmp_path):
    out = tmp_path / "run"
    assert main(["--mode", "simulate", "--out", str(out)]) == 0
    assert (out / "simulate.json").is_file()
    assert list(out.glob("*.log"))
