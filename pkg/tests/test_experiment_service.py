import json
import math
from dataclasses import replace

import pytest

from models.experiment import AntennaKind, ExperimentSpec, Scheme
from models.results import CalibrationResult
from models.system import SystemParams
from services import experiment_service


# ============================================================
# Presets
# ============================================================

def test_density_preset_grid():
    spec = experiment_service.expand_preset("fig2")
    assert len(spec.sweep_values) == 21
    assert spec.sweep_values[0] == pytest.approx(1e-5)
    assert spec.sweep_values[-1] == pytest.approx(1e-3)
    assert spec.models == ("los", "nlos", "sidelobe")
    assert spec.antenna is AntennaKind.ULA


def test_blockage_preset_grid():
    spec = experiment_service.expand_preset("fig4")
    assert spec.sweep_parameter == "beta"
    assert spec.sweep_values[0] == 0.0
    assert spec.sweep_values[-1] == pytest.approx(0.1)
    series = [label for label, _ in experiment_service._series(spec)]
    assert series == ["n_bs=12,n_ue=4", "n_bs=3,n_ue=4", "n_bs=1,n_ue=1"]


def test_beam_count_preset_has_one_series_per_density():
    spec = experiment_service.expand_preset("fig6")
    assert spec.sweep_values == tuple(float(n) for n in range(1, 51))
    assert len(experiment_service._series(spec)) == 4


def test_packet_preset_runs_both_rate_conventions():
    spec = experiment_service.expand_preset("fig7", trials=200)
    models = {task.model for task in experiment_service._plan(spec)}
    assert models == {"mean_rate", "mean_latency"}


def test_preset_overrides():
    spec = experiment_service.expand_preset("fig5", trials=300, seed=4, output_path="out/b.csv")
    assert (spec.trials, spec.seed, spec.output_path) == (300, 4, "out/b.csv")
    assert spec.sweep_values == tuple(float(n) for n in range(1, 61))


def test_unknown_preset():
    with pytest.raises(ValueError, match="Unknown preset"):
        experiment_service.expand_preset("fig9")


def test_density_preset_adds_sector_reference_and_nlos_exponent():
    tasks = experiment_service._plan(experiment_service.expand_preset("fig2"))
    monte_carlo = [t for t in tasks if t.engine == "monte_carlo"]
    assert (monte_carlo[0].scheme, monte_carlo[0].antenna) == (Scheme.RANDOM, AntennaKind.SECTOR)
    nlos = next(t for t in tasks if t.model == "nlos")
    assert nlos.params.alpha_nlos == 4.0


def test_latency_preset_uses_scheme_frames():
    spec = experiment_service.expand_preset("fig3")
    assert experiment_service._frame_for(spec, Scheme.EXHAUSTIVE).t_cs == pytest.approx(5.0)
    assert experiment_service._frame_for(spec, Scheme.ITERATIVE).t_cs == pytest.approx(2.5)


def test_integer_sweeps_are_cast():
    params = experiment_service._apply(SystemParams(), "n_c", 7.0)
    assert params.n_c == 7 and isinstance(params.n_c, int)


# ============================================================
# Runs
# ============================================================

def _analytic_spec(tmp_path, **kwargs):
    defaults = dict(sweep_values=(1e-4, 1e-3), engines=("analytic",), models=("los",),
                    output_path=str(tmp_path / "run.csv"))
    defaults.update(kwargs)
    return ExperimentSpec(**defaults)


def test_analytic_run_writes_csv_and_metadata(tmp_path):
    run = experiment_service.run_experiment(_analytic_spec(tmp_path))
    rows = experiment_service.read_csv(run.csv_path)
    assert len(rows) == 2
    assert tuple(rows[0]) == experiment_service.CSV_COLUMNS
    assert float(rows[1]["estimate"]) == pytest.approx(0.0288, abs=0.002)
    assert all(row["error"] == "" for row in rows)

    metadata = json.loads(run.metadata_path.read_text(encoding="utf-8"))
    assert run.metadata_path.name == "run.csv.meta.json"
    assert metadata["rows"] == 2 and metadata["failed_rows"] == 0
    assert metadata["epsilon_source"] == "configured"
    assert set(metadata["versions"]) == {"python", "numpy", "scipy"}


def test_failed_points_are_reported_and_the_run_continues(tmp_path):
    spec = _analytic_spec(tmp_path, metric="e_total_ms", engines=("analytic", "monte_carlo"),
                          trials=100, sweep_parameter="packet_bits", sweep_values=(1e3,),
                          params=replace(SystemParams(), lambda_bs=1e-3))
    run = experiment_service.run_experiment(spec)
    analytic = [row for row in run.rows if row["engine"] == "analytic"]
    simulated = [row for row in run.rows if row["engine"] == "monte_carlo"]
    assert analytic[0]["error"].startswith("ValueError")
    assert math.isnan(analytic[0]["estimate"])
    assert simulated[0]["error"] == ""
    assert simulated[0]["estimate"] > 0


def test_latency_metric_from_closed_form(tmp_path):
    run = experiment_service.run_experiment(_analytic_spec(tmp_path, metric="e_ia_ms"))
    assert all(row["estimate"] >= 2.5 for row in run.rows)


def test_progress_counts_points(tmp_path):
    calls = []
    experiment_service.run_experiment(_analytic_spec(tmp_path), progress_callback=lambda d, t: calls.append((d, t)))
    assert calls == [(1, 2), (2, 2)]


def _without_wall_time(path):
    return [{k: v for k, v in row.items() if k != "wall_time_s"} for row in experiment_service.read_csv(path)]


def test_runs_are_reproducible(tmp_path):
    spec = ExperimentSpec(sweep_values=(1e-5, 1e-4), trials=200, seed=3,
                          output_path=str(tmp_path / "a.csv"))
    first = experiment_service.run_experiment(spec)
    second = experiment_service.run_experiment(replace(spec, output_path=str(tmp_path / "b.csv")))
    assert _without_wall_time(first.csv_path) == _without_wall_time(second.csv_path)


def test_parallel_run_matches_serial(tmp_path):
    spec = _analytic_spec(tmp_path)
    serial = experiment_service.run_experiment(spec)
    parallel = experiment_service.run_experiment(replace(spec, output_path=str(tmp_path / "p.csv")), workers=2)
    assert _without_wall_time(serial.csv_path) == _without_wall_time(parallel.csv_path)


def test_budget_sweep_sets_the_search_budget(tmp_path):
    spec = ExperimentSpec(sweep_parameter="n_c", sweep_values=(1.0, 47.0), engines=("monte_carlo",),
                          schemes=(Scheme.EXHAUSTIVE,), trials=100, output_path=str(tmp_path / "n.csv"))
    run = experiment_service.run_experiment(spec)
    # 47 slots cannot cover a 48-slot exhaustive sweep
    assert [row["estimate"] for row in run.rows] == [1.0, 1.0]


def test_beam_count_scan_records_optima(tmp_path):
    spec = replace(experiment_service.expand_preset("fig6", trials=100, output_path=str(tmp_path / "f6.csv")),
                   sweep_values=(1.0, 2.0, 3.0))
    run = experiment_service.run_experiment(spec)
    assert len(run.rows) == 24
    assert {row["antenna"] for row in run.rows if row["engine"] == "monte_carlo"} == {"ula"}
    metadata = json.loads(run.metadata_path.read_text(encoding="utf-8"))
    assert set(metadata["optima"]) == {f"lambda_bs={lam!r} {engine}" for lam in (1e-4, 2e-4, 5e-4, 1e-3)
                                       for engine in ("analytic", "monte_carlo")}
    assert all(n in (1, 2, 3) for n in metadata["optima"].values())


def test_beam_count_preset_simulates_random_search_on_the_array():
    spec = experiment_service.expand_preset("fig6")
    tasks = experiment_service._plan(spec)
    simulated = [t for t in tasks if t.engine == "monte_carlo"]
    assert len(simulated) == 4
    assert {(t.scheme, t.antenna) for t in simulated} == {(Scheme.RANDOM, AntennaKind.ULA)}


@pytest.mark.slow
def test_dense_beam_count_optimum_from_simulation(tmp_path):
    spec = replace(experiment_service.expand_preset("fig6", trials=5000, output_path=str(tmp_path / "f6.csv")),
                   sweep_values=tuple(float(n) for n in range(4, 13)), engines=("monte_carlo",))
    run = experiment_service.run_experiment(spec)
    metadata = json.loads(run.metadata_path.read_text(encoding="utf-8"))
    assert metadata["optima"]["lambda_bs=0.001 monte_carlo"] in (6, 7, 9)


# ============================================================
# Sidelobe epsilon
# ============================================================

@pytest.fixture
def calibrated_epsilon(monkeypatch):
    def fake_calibration(anchors, params):
        return CalibrationResult(0.05, 0.0, "ok")
    monkeypatch.setattr(experiment_service.calibration_service, "calibrate_epsilon", fake_calibration)
    return 0.05


def test_calibrated_epsilon_only_reaches_the_analytic_sidelobe_curve(calibrated_epsilon):
    spec = experiment_service.expand_preset("fig2")
    epsilon, source = experiment_service._resolve_epsilon(spec)
    assert (epsilon, source) == (calibrated_epsilon, "calibrated")
    tasks = experiment_service._plan(spec, epsilon)
    for task in tasks:
        expected = calibrated_epsilon if (task.engine, task.model) == ("analytic", "sidelobe") else 0.0
        assert task.params.epsilon == expected
    assert sum(t.engine == "monte_carlo" for t in tasks) == 4


def test_configured_epsilon_is_not_recalibrated(calibrated_epsilon):
    spec = replace(experiment_service.expand_preset("fig2"), params=replace(SystemParams(), epsilon=0.2))
    assert experiment_service._resolve_epsilon(spec) == (None, "configured")
    assert all(t.params.epsilon == 0.2 for t in experiment_service._plan(spec))


@pytest.mark.slow
def test_metadata_records_the_sidelobe_epsilon(tmp_path, calibrated_epsilon):
    spec = replace(experiment_service.expand_preset("fig4", output_path=str(tmp_path / "f4.csv")),
                   sweep_values=(0.02,), engines=("analytic",))
    run = experiment_service.run_experiment(spec)
    metadata = json.loads(run.metadata_path.read_text(encoding="utf-8"))
    assert metadata["epsilon_source"] == "calibrated"
    assert metadata["sidelobe_epsilon"] == calibrated_epsilon
    assert metadata["parameters"]["epsilon"] == 0.0
    assert all(row["error"] == "" for row in run.rows)
