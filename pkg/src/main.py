"""
CellSearch - Main entry point.

This module parses the command line, configures logging and dispatches
to the experiment, latency and calibration services.

Subcommands:
- analyze: Analytic sweep of a configuration.
- simulate: Monte Carlo sweep of a configuration.
- optimize: Beam count minimizing the initial-access latency.
- calibrate: Fit the sidelobe gain to reference failure probabilities.
- preset <name>: Run a figure preset (fig2 ... fig7).
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from tqdm import tqdm

from models.errors import ConfigError
from models.experiment import ExperimentSpec, PRESETS
from services import calibration_service, config_service, experiment_service, latency_service

logger = logging.getLogger(__name__)

_ENGINE_FLAGS = {"analytic": "analytic", "mc": "monte_carlo", "monte_carlo": "monte_carlo"}


class ProgressBar:
    """Progress callback drawing a tqdm bar on stderr."""

    def __init__(self, description: str, enabled: bool = True):
        self.description = description
        self.enabled = enabled
        self.bar: Optional[tqdm] = None

    def __call__(self, done: int, total: int):
        if not self.enabled:
            return
        if self.bar is None:
            self.bar = tqdm(total=total, desc=self.description, unit="pt", leave=False)
        self.bar.update(done - self.bar.n)

    def close(self):
        if self.bar is not None:
            self.bar.close()
            self.bar = None


def _configure_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )


def _parse_engines(text: str) -> tuple[str, ...]:
    engines = []
    for item in text.split(","):
        name = item.strip()
        if name not in _ENGINE_FLAGS:
            raise argparse.ArgumentTypeError(f"unknown engine {name!r} (use analytic, mc)")
        engines.append(_ENGINE_FLAGS[name])
    return tuple(dict.fromkeys(engines))


def _parse_anchor(text: str) -> tuple[float, float]:
    try:
        x, p = text.split(":")
        return float(x), float(p)
    except ValueError:
        raise argparse.ArgumentTypeError(f"anchor must be VALUE:P_F, got {text!r}")


def _parse_range(text: str) -> range:
    try:
        lo, hi = (int(part) for part in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must be LO..HI, got {text!r}")
    return range(lo, hi + 1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration file")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--engines", type=_parse_engines, help="comma-separated: analytic,mc")
    common.add_argument("--threads", type=int, help="worker processes")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings only")

    parser = argparse.ArgumentParser(
        prog="cellsearch",
        description="Detection failure and latency of mmWave cell search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="analytic sweep of a configuration")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo sweep of a configuration")

    optimize = sub.add_parser("optimize", parents=[common], help="optimal BS beam count")
    optimize.add_argument("--range", dest="n_bs_range", type=_parse_range, default=range(1, 51),
                          help="candidate beam counts LO..HI (default 1..50)")
    optimize.add_argument("--p-f-max", type=float, default=1.0, help="largest acceptable P_f")

    calibrate = sub.add_parser("calibrate", parents=[common], help="fit the sidelobe gain")
    calibrate.add_argument("--anchor", dest="anchors", type=_parse_anchor, action="append",
                           help="VALUE:P_F reference point (repeatable)")
    calibrate.add_argument("--parameter", default="lambda_bs", help="parameter the anchors sweep")

    preset = sub.add_parser("preset", parents=[common], help="run a figure preset")
    preset.add_argument("name", choices=[p for p in PRESETS if p != "custom"])
    return parser


def _load_spec(args: argparse.Namespace, settings: Optional[dict] = None) -> ExperimentSpec:
    if args.command == "preset":
        spec = experiment_service.expand_preset(args.name, args.trials, args.seed, args.out)
    elif args.config:
        spec = config_service.load_config_file(args.config)
    else:
        spec = ExperimentSpec()
    spec = config_service.with_overrides(spec, trials=args.trials, seed=args.seed,
                                         output_path=args.out, engines=args.engines)
    output_dir = (settings or {}).get("output_dir")
    from_file = args.config and args.command != "preset"
    if output_dir and args.out is None and not from_file and not Path(spec.output_path).is_absolute():
        spec = replace(spec, output_path=str(Path(output_dir) / spec.output_path))
    if args.command == "analyze":
        spec = replace(spec, engines=("analytic",))
    elif args.command == "simulate":
        spec = replace(spec, engines=("monte_carlo",))
    return spec


def _run_sweep(spec: ExperimentSpec, workers: int, show_progress: bool) -> int:
    if not spec.sweep_values:
        current = spec.packet_bits if spec.sweep_parameter == "packet_bits" else getattr(
            spec.params, spec.sweep_parameter)
        spec = replace(spec, sweep_values=(float(current),))
    progress = ProgressBar(spec.preset, enabled=show_progress)
    try:
        run = experiment_service.run_experiment(spec, workers, progress)
    finally:
        progress.close()
    failed = sum(1 for row in run.rows if row["error"])
    print(f"{len(run.rows)} rows written to {run.csv_path} ({failed} failed)")
    config_service.update_settings({"output_dir": str(Path(run.csv_path).resolve().parent)})
    return 1 if failed == len(run.rows) else 0


def _run_optimize(spec: ExperimentSpec, args: argparse.Namespace, workers: int) -> int:
    best, scan = latency_service.optimize_beamwidth(
        spec.params, spec.k_cycles, args.p_f_max, args.n_bs_range, workers=workers
    )
    for n_bs, report in scan.grid:
        print(f"N_BS={n_bs:3d}  P_f={report.p_f:.6f}  E[D_I]={report.e_ia_ms:.4f} ms")
    if best is None:
        print(f"no feasible beam count; smallest P_f {scan.min_failure:.6g} at N_BS={scan.min_failure_n_bs}")
        return 1
    print(f"optimal N_BS={best}  E[D_I]={scan.e_ia_ms:.4f} ms")
    return 0


def _run_calibrate(spec: ExperimentSpec, args: argparse.Namespace) -> int:
    anchors = args.anchors or calibration_service.DENSITY_ANCHORS
    result = calibration_service.calibrate_epsilon(anchors, spec.params, parameter=args.parameter)
    for x, target, fitted in result.diagnostics:
        print(f"{args.parameter}={x!r}  target={target:.6g}  fitted={fitted:.6g}")
    print(f"epsilon={result.epsilon!r}  rms_residual={result.residual_rms:.4g}  status={result.status}")
    return 0 if result.status == "ok" else 1


def main(argv: Optional[list[str]] = None) -> int:
    """
    Run the cellsearch command line.

    Returns:
        Process exit status.
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    settings = config_service.load_settings()
    workers = args.threads or int(settings.get("workers") or 1)

    try:
        spec = _load_spec(args, settings)
        if args.command == "optimize":
            return _run_optimize(spec, args, workers)
        if args.command == "calibrate":
            return _run_calibrate(spec, args)
        return _run_sweep(spec, workers, show_progress=not args.quiet)
    except ConfigError as e:
        logger.error("invalid configuration: %s", e)
        return 2
    except (ValueError, IOError) as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
