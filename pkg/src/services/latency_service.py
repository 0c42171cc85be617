"""
Latency service.

This module computes the expected initial-access latency, the expected
latency until a packet is delivered, and scans the BS beam count for
the lowest initial-access latency.

Available methods:
- expected_ia_latency(p_f, frame): Expected initial-access latency in ms.
- expected_total_latency(p_f, rate_bps, packet_bits, frame): Expected total latency in ms.
- ia_report(p_f, frame): LatencyReport for a failure probability.
- optimize_beamwidth(params, k_cycles, p_f_max, n_bs_range, evaluator, workers):
  Beam count minimizing the initial-access latency.

Cell search is retried every frame until it succeeds, so the number of
failed frames is geometric.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, Optional

import numpy as np

from models.results import BeamwidthScan, LatencyReport
from models.system import FrameTiming, SystemParams
from services.analytic_service import analytic_failure

logger = logging.getLogger(__name__)


def _check_failure(p_f: float):
    if not 0.0 <= p_f <= 1.0:
        raise ValueError(f"failure probability must lie in [0, 1], got {p_f}")


def expected_ia_latency(p_f: float, frame: FrameTiming) -> float:
    """
    Expected initial-access latency (1/(1 - p_f) - 1) T_f + T_cs + T_ra.

    Returns:
        Latency in ms; math.inf when p_f = 1.
    """
    _check_failure(p_f)
    if p_f == 1.0:
        return math.inf
    return (1.0 / (1.0 - p_f) - 1.0) * frame.t_frame + frame.t_cs + frame.t_ra


def expected_total_latency(p_f: float, rate_bps, packet_bits: float, frame: FrameTiming):
    """
    Expected latency until a packet of packet_bits bits is delivered.

    After access, each frame carries data for T_f - T_cs - T_ra ms and
    spends T_cs + T_ra ms on overhead, so the latency is a staircase in the
    packet size.

    Args:
        p_f: Detection failure probability.
        rate_bps: Data rate in bit/s (scalar or array).
        packet_bits: Packet size in bits.
        frame: Frame timing.

    Returns:
        Latency in ms; math.inf when p_f = 1.

    Raises:
        ValueError: If a rate is not positive or packet_bits is negative.
    """
    _check_failure(p_f)
    rate = np.asarray(rate_bps, dtype=float)
    if np.any(rate <= 0):
        raise ValueError("rate must be positive")
    if packet_bits < 0:
        raise ValueError(f"packet_bits must be nonnegative, got {packet_bits}")
    if p_f == 1.0:
        return math.inf
    rate_per_ms = rate / 1000.0
    frames = np.ceil(packet_bits / (rate_per_ms * frame.data_window))
    frames = np.maximum(frames, 1.0)
    latency = ((1.0 / (1.0 - p_f) - 1.0) * frame.t_frame
               + frames * frame.access_overhead + packet_bits / rate_per_ms)
    if latency.ndim == 0:
        return float(latency)
    return latency


def ia_report(p_f: float, frame: FrameTiming) -> LatencyReport:
    return LatencyReport(p_f=p_f, e_ia_ms=expected_ia_latency(p_f, frame), frame=frame)


def _scan_point(params: SystemParams, n_bs: int, k_cycles: int,
                evaluator: Callable[[SystemParams, int], float]) -> tuple[int, LatencyReport]:
    point = replace(params, n_bs=n_bs, m_bs=n_bs, n_c=k_cycles * n_bs)
    frame = FrameTiming.adapted(n_bs)
    p_f = float(evaluator(point, point.n_c))
    return n_bs, ia_report(p_f, frame)


def optimize_beamwidth(
    params: SystemParams,
    k_cycles: int,
    p_f_max: float,
    n_bs_range: Iterable[int],
    evaluator: Optional[Callable[[SystemParams, int], float]] = None,
    workers: int = 1,
) -> tuple[Optional[int], BeamwidthScan]:
    """
    BS beam count minimizing the expected initial-access latency.

    Each candidate N_BS listens for k_cycles * N_BS slots in a frame whose
    burst and random-access window both last N_BS * 1.25/16 ms. The ULA
    array size follows the beam count.

    Args:
        params: System parameters.
        k_cycles: Scan cycles per cell search.
        p_f_max: Largest acceptable failure probability.
        n_bs_range: Candidate beam counts.
        evaluator: evaluator(params, n_c) -> failure probability (defaults to
            the analytic model that fits params).
        workers: Threads evaluating grid points.

    Returns:
        (n_bs*, BeamwidthScan); n_bs* is None when no candidate is feasible.
    """
    candidates = sorted(set(int(n) for n in n_bs_range))
    if not candidates:
        raise ValueError("n_bs_range must not be empty")
    if k_cycles < 1:
        raise ValueError(f"k_cycles must be positive, got {k_cycles}")
    if evaluator is None:
        evaluator = analytic_failure

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grid = list(pool.map(lambda n: _scan_point(params, n, k_cycles, evaluator), candidates))
    else:
        grid = [_scan_point(params, n, k_cycles, evaluator) for n in candidates]

    feasible = [(n, report) for n, report in grid if report.p_f <= p_f_max]
    lowest_n, lowest = min(grid, key=lambda item: (item[1].p_f, item[0]))
    if not feasible:
        logger.info("no beam count reaches P_f <= %g; smallest P_f %.4g at N_BS=%d",
                    p_f_max, lowest.p_f, lowest_n)
        return None, BeamwidthScan(False, None, None, lowest.p_f, lowest_n, tuple(grid))

    best_n, best = min(feasible, key=lambda item: (item[1].e_ia_ms, item[0]))
    logger.info("optimal N_BS=%d with E[D_I]=%.4f ms", best_n, best.e_ia_ms)
    return best_n, BeamwidthScan(True, best_n, best.e_ia_ms, lowest.p_f, lowest_n, tuple(grid))
