"""
Experiment service.

This module expands figure presets into experiment specifications, runs
sweeps over the analytic and Monte Carlo engines and writes the results
as CSV with a JSON metadata sidecar.

Available methods:
- expand_preset(name, trials, seed, output_path): Fully resolved ExperimentSpec of a preset.
- run_experiment(spec, workers, progress_callback): Run a sweep and write its artifacts.
- write_csv(rows, path): Write result rows.
- read_csv(path): Read result rows back as strings.

CSV columns (in order): sweep_parameter, sweep_value, series, scheme,
antenna, model, engine, metric, estimate, uncertainty, samples, seed,
wall_time_s, error. Floats are written with repr(), which round-trips.
uncertainty is the quadrature error estimate for the analytic engine and
the Wilson 95% half-width for the Monte Carlo engine.
"""
import csv
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy

from models.experiment import AntennaKind, ExperimentSpec, RATE_CONVENTIONS, Scheme
from models.results import ResultRow, RunMetadata
from models.system import FrameTiming, SystemParams
from services import calibration_service, dataplane_service, latency_service
from services.analytic_service import analytic_failure, evaluate_failure
from services.simulation_service import estimate_failure

logger = logging.getLogger(__name__)

CSV_COLUMNS = tuple(ResultRow.__annotations__)

DENSITY_GRID = tuple(float(x) for x in np.logspace(-5, -3, 21))
BLOCKAGE_GRID = tuple(round(0.005 * i, 3) for i in range(21))
BUDGET_GRID = tuple(float(n) for n in range(1, 61))
BEAM_GRID = tuple(float(n) for n in range(1, 51))
PACKET_GRID = tuple(float(x) for x in np.logspace(3, 9, 25))

_FIG6_DENSITIES = (1e-4, 2e-4, 5e-4, 1e-3)
_FIG7_DENSITIES = (1e-4, 1e-3)
_ULA_SCHEMES = (Scheme.RANDOM, Scheme.EXHAUSTIVE, Scheme.ITERATIVE)
_NLOS_EXPONENT = 4.0


class ExperimentRun(NamedTuple):
    rows: list
    csv_path: Path
    metadata_path: Path


@dataclass(frozen=True)
class _Task:
    """One curve of a sweep."""
    series: str
    params: SystemParams
    engine: str
    scheme: Scheme
    antenna: AntennaKind
    model: str
    frame: FrameTiming


def expand_preset(name: str, trials: Optional[int] = None, seed: Optional[int] = None,
                  output_path: Optional[str] = None) -> ExperimentSpec:
    """
    Fully resolved specification of a figure preset.

    Args:
        name: fig2 ... fig7 or custom.
        trials: Monte Carlo trials (default 10000).
        seed: Base seed (default 1).
        output_path: CSV path (default <name>.csv).

    Raises:
        ValueError: If the preset is unknown.
    """
    common = {
        "trials": 10000 if trials is None else trials,
        "seed": 1 if seed is None else seed,
        "output_path": output_path or f"{name}.csv",
    }
    if name == "fig2":
        return ExperimentSpec(preset=name, sweep_parameter="lambda_bs", sweep_values=DENSITY_GRID,
                              schemes=_ULA_SCHEMES, antenna=AntennaKind.ULA,
                              models=("los", "nlos", "sidelobe"), **common)
    if name == "fig3":
        return ExperimentSpec(preset=name, sweep_parameter="lambda_bs", sweep_values=DENSITY_GRID,
                              schemes=_ULA_SCHEMES, antenna=AntennaKind.ULA, models=("los",),
                              metric="e_ia_ms", **common)
    if name == "fig4":
        return ExperimentSpec(preset=name, sweep_parameter="beta", sweep_values=BLOCKAGE_GRID,
                              schemes=(Scheme.RANDOM,), antenna=AntennaKind.SECTOR,
                              models=("los", "sidelobe"), **common)
    if name == "fig5":
        return ExperimentSpec(preset=name, sweep_parameter="n_c", sweep_values=BUDGET_GRID,
                              schemes=_ULA_SCHEMES, antenna=AntennaKind.ULA, models=("los",), **common)
    if name == "fig6":
        return ExperimentSpec(preset=name, sweep_parameter="n_bs", sweep_values=BEAM_GRID,
                              engines=("analytic", "monte_carlo"), schemes=(Scheme.RANDOM,),
                              antenna=AntennaKind.ULA, models=("los",), metric="e_ia_ms",
                              k_cycles=1, **common)
    if name == "fig7":
        return ExperimentSpec(preset=name, sweep_parameter="packet_bits", sweep_values=PACKET_GRID,
                              engines=("monte_carlo",), schemes=_ULA_SCHEMES, antenna=AntennaKind.ULA,
                              metric="e_total_ms", **common)
    if name == "custom":
        return ExperimentSpec(preset=name, **common)
    raise ValueError(f"Unknown preset: {name}")


def _series(spec: ExperimentSpec) -> list[tuple[str, SystemParams]]:
    base = spec.params
    if spec.preset == "fig4":
        return [
            (f"n_bs={n_bs},n_ue={n_ue}", replace(base, n_bs=n_bs, n_ue=n_ue, m_bs=n_bs, m_ue=n_ue, n_c=n_bs))
            for n_bs, n_ue in ((12, 4), (3, 4), (1, 1))
        ]
    if spec.preset == "fig6":
        return [(f"lambda_bs={lam!r}", replace(base, lambda_bs=lam)) for lam in _FIG6_DENSITIES]
    if spec.preset == "fig7":
        return [(f"lambda_bs={lam!r}", replace(base, lambda_bs=lam)) for lam in _FIG7_DENSITIES]
    return [("", base)]


def _frame_for(spec: ExperimentSpec, scheme: Scheme) -> FrameTiming:
    if spec.preset in ("fig3", "fig7"):
        return spec.scheme_config(scheme).frame()
    return spec.frame


def _plan(spec: ExperimentSpec, sidelobe_epsilon: Optional[float] = None) -> list[_Task]:
    """
    Curves of the sweep in output order.

    sidelobe_epsilon, when given, applies to the analytic sidelobe curve only.
    """
    tasks = []
    mc_runs = [(scheme, spec.antenna) for scheme in spec.schemes]
    if spec.preset == "fig2":
        mc_runs = [(Scheme.RANDOM, AntennaKind.SECTOR)] + mc_runs
    for label, params in _series(spec):
        if "analytic" in spec.engines:
            for model in spec.models:
                point = params
                if model == "nlos" and math.isinf(point.alpha_nlos) and spec.preset == "fig2":
                    point = replace(point, alpha_nlos=_NLOS_EXPONENT)
                if model == "sidelobe" and sidelobe_epsilon is not None:
                    point = replace(point, epsilon=sidelobe_epsilon)
                tasks.append(_Task(label, point, "analytic", Scheme.RANDOM, AntennaKind.SECTOR, model,
                                   _frame_for(spec, Scheme.RANDOM)))
        if "monte_carlo" in spec.engines:
            conventions = RATE_CONVENTIONS if spec.preset == "fig7" else (spec.rate_convention,)
            for scheme, antenna in mc_runs:
                if spec.metric == "e_total_ms":
                    for convention in conventions:
                        tasks.append(_Task(label, params, "monte_carlo", scheme, antenna, convention,
                                           _frame_for(spec, scheme)))
                else:
                    tasks.append(_Task(label, params, "monte_carlo", scheme, antenna, "",
                                       _frame_for(spec, scheme)))
    return tasks


def _apply(params: SystemParams, parameter: str, value: float) -> SystemParams:
    if parameter == "packet_bits":
        return params
    kind = {f.name: f.type for f in fields(SystemParams)}[parameter]
    if kind is int or str(kind).startswith("typing.Optional"):
        value = int(round(value))
    elif kind is bool:
        value = bool(value)
    return replace(params, **{parameter: value})


def _latency_spread(p_f: float, spread: float, frame: FrameTiming) -> float:
    if p_f >= 1.0:
        return math.inf
    return spread * frame.t_frame / (1.0 - p_f) ** 2


def _evaluate(task: _Task, spec: ExperimentSpec, value: float, workers: int,
              cache: dict) -> tuple[float, float, int]:
    """(estimate, uncertainty, samples) of one curve at one sweep value."""
    params = _apply(task.params, spec.sweep_parameter, value)
    packet_bits = value if spec.sweep_parameter == "packet_bits" else spec.packet_bits
    budget = params.n_c if spec.sweep_parameter == "n_c" else None

    if task.engine == "analytic":
        if spec.metric == "e_total_ms":
            raise ValueError("the analytic engine has no data-plane rate; use monte_carlo")
        result = evaluate_failure(task.model, params)
        if spec.metric == "p_f":
            return result.value, result.error_estimate, result.evaluations
        return (latency_service.expected_ia_latency(result.value, task.frame),
                _latency_spread(result.value, result.error_estimate, task.frame), result.evaluations)

    scheme_config = replace(spec.scheme_config(task.scheme, budget), antenna_model=task.antenna)
    if spec.metric == "e_total_ms":
        key = (task.scheme, task.antenna, task.series, params)
        if key not in cache:
            cache[key] = dataplane_service.simulate_data_plane(
                scheme_config, params, spec.trials, spec.seed, spec.oversampling, workers
            )
        estimate = cache[key]
        report = dataplane_service.total_latency(estimate, packet_bits, task.frame, task.model)
        return report.e_total_ms, _latency_spread(estimate.p_f, estimate.ci_halfwidth, task.frame), spec.trials

    p_f, halfwidth = estimate_failure(scheme_config, params, spec.trials, spec.seed, workers)
    if spec.metric == "p_f":
        return p_f, halfwidth, spec.trials
    return (latency_service.expected_ia_latency(p_f, task.frame),
            _latency_spread(p_f, halfwidth, task.frame), spec.trials)


def _row(task: _Task, spec: ExperimentSpec, value: float) -> ResultRow:
    return ResultRow(
        sweep_parameter=spec.sweep_parameter,
        sweep_value=value,
        series=task.series,
        scheme=task.scheme.value,
        antenna=task.antenna.value,
        model=task.model,
        engine=task.engine,
        metric=spec.metric,
        estimate=math.nan,
        uncertainty=math.nan,
        samples=0,
        seed=spec.seed,
        wall_time_s=0.0,
        error="",
    )


def _run_point(task: _Task, spec: ExperimentSpec, value: float, workers: int, cache: dict) -> ResultRow:
    row = _row(task, spec, value)
    started = time.perf_counter()
    try:
        row["estimate"], row["uncertainty"], row["samples"] = _evaluate(task, spec, value, workers, cache)
    except Exception as e:
        logger.exception("%s %s/%s at %s=%r failed", task.engine, task.scheme.value,
                         task.model or task.antenna.value, spec.sweep_parameter, value)
        row["error"] = f"{type(e).__name__}: {e}"
    row["wall_time_s"] = time.perf_counter() - started
    return row


def _analytic_point(task: _Task, spec: ExperimentSpec, value: float) -> ResultRow:
    return _run_point(task, spec, value, 1, {})


def _beam_scan_rows(spec: ExperimentSpec, workers: int, optima: dict,
                    progress: Callable[[], None]) -> list[ResultRow]:
    """Rows of the beam-count scan, one series per density."""
    rows = []
    candidates = [int(round(v)) for v in spec.sweep_values]
    for task in _plan(spec):
        started = time.perf_counter()
        if task.engine == "analytic":
            evaluator = analytic_failure
            model = "sidelobe" if task.params.epsilon > 0 else "los"
        else:
            def evaluator(params, n_c, _task=task):
                config = replace(spec.scheme_config(_task.scheme, n_c), antenna_model=_task.antenna)
                return estimate_failure(config, params, spec.trials, spec.seed, workers)[0]
            model = ""
        task = replace(task, model=model)
        try:
            best, scan = latency_service.optimize_beamwidth(
                task.params, spec.k_cycles, 1.0, candidates, evaluator,
                workers=workers if task.engine == "analytic" else 1,
            )
        except Exception as e:
            logger.exception("beam-count scan for %s failed", task.series)
            for value in spec.sweep_values:
                row = _row(task, spec, value)
                row["error"] = f"{type(e).__name__}: {e}"
                rows.append(row)
                progress()
            continue
        elapsed = (time.perf_counter() - started) / max(len(scan.grid), 1)
        optima[f"{task.series} {task.engine}".strip()] = best
        for n_bs, report in scan.grid:
            row = _row(task, spec, float(n_bs))
            row["estimate"] = report.e_ia_ms if spec.metric == "e_ia_ms" else report.p_f
            row["uncertainty"] = 0.0
            row["samples"] = spec.trials if task.engine == "monte_carlo" else 0
            row["wall_time_s"] = elapsed
            rows.append(row)
            progress()
    return rows


def _resolve_epsilon(spec: ExperimentSpec) -> tuple[Optional[float], str]:
    """
    Epsilon of the analytic sidelobe curve and where it came from.

    A preset whose sidelobe curve has no configured epsilon gets a
    calibrated one. None means the configured parameters are used as is.
    """
    if spec.preset == "custom" or "sidelobe" not in spec.models or "analytic" not in spec.engines:
        return None, "configured"
    if spec.params.epsilon > 0:
        return None, "configured"
    result = calibration_service.calibrate_epsilon(calibration_service.DENSITY_ANCHORS, spec.params)
    source = "calibrated" if result.status == "ok" else "calibrated (failed)"
    logger.info("sidelobe epsilon %.4g (%s)", result.epsilon, source)
    return result.epsilon, source


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[ResultRow], path: Path):
    """
    Write result rows.

    Raises:
        IOError: If unable to write the file.
    """
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_format(row[column]) for column in CSV_COLUMNS])
    except IOError as e:
        raise IOError(f"Failed to write results: {str(e)}")


def read_csv(path: Path) -> list[dict]:
    """Result rows as dictionaries of strings."""
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _metadata_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.name + ".meta.json")


def _save_metadata(path: Path, metadata: RunMetadata):
    with path.open("w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=2, ensure_ascii=False, default=str)


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> ExperimentRun:
    """
    Run a sweep and write its CSV and metadata sidecar.

    Points that raise are logged and emitted with an error message; the
    run continues with the next point. Apart from wall_time_s, the CSV is
    identical across runs with the same spec and any worker count.

    Args:
        spec: Experiment specification.
        workers: Worker processes for Monte Carlo trials and analytic points.
        progress_callback: Optional callback(done_points, total_points).

    Returns:
        ExperimentRun with the rows and the written paths.
    """
    started_at = datetime.now(timezone.utc).isoformat()
    sidelobe_epsilon, epsilon_source = _resolve_epsilon(spec)
    csv_path = Path(spec.output_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)

    tasks = _plan(spec, sidelobe_epsilon)
    total = len(tasks) * len(spec.sweep_values)
    done = 0

    def progress():
        nonlocal done
        done += 1
        if progress_callback:
            progress_callback(done, total)

    logger.info("running %s: %d curves x %d points of %s", spec.preset, len(tasks),
                len(spec.sweep_values), spec.sweep_parameter)
    optima: dict = {}
    if spec.preset == "fig6":
        rows = _beam_scan_rows(spec, workers, optima, progress)
    else:
        jobs = [(task, value) for task in tasks for value in spec.sweep_values]
        rows: list = [None] * len(jobs)
        cache: dict = {}
        pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            futures = {}
            for index, (task, value) in enumerate(jobs):
                if pool is not None and task.engine == "analytic":
                    futures[index] = pool.submit(_analytic_point, task, spec, value)
                else:
                    rows[index] = _run_point(task, spec, value, workers, cache)
                    progress()
            for index, future in futures.items():
                rows[index] = future.result()
                progress()
        finally:
            if pool is not None:
                pool.shutdown()

    write_csv(rows, csv_path)
    failed = sum(1 for row in rows if row["error"])
    metadata = RunMetadata(
        preset=spec.preset,
        started_at=started_at,
        finished_at=datetime.now(timezone.utc).isoformat(),
        parameters=asdict(spec.params),
        frames={
            "configured": asdict(spec.frame),
            **{scheme.value: asdict(_frame_for(spec, scheme)) for scheme in spec.schemes},
        },
        epsilon_source=epsilon_source,
        sidelobe_epsilon=spec.params.epsilon if sidelobe_epsilon is None else sidelobe_epsilon,
        rate_convention=spec.rate_convention if spec.preset != "fig7" else ",".join(RATE_CONVENTIONS),
        trials=spec.trials,
        seed=spec.seed,
        rows=len(rows),
        failed_rows=failed,
        optima=optima,
        versions={"python": platform.python_version(), "numpy": np.__version__,
                  "scipy": scipy.__version__},
    )
    metadata_path = _metadata_path(csv_path)
    _save_metadata(metadata_path, metadata)
    if failed:
        logger.warning("%d of %d rows failed; see the error column of %s", failed, len(rows), csv_path)
    logger.info("wrote %d rows to %s", len(rows), csv_path)
    return ExperimentRun(rows, csv_path, metadata_path)
