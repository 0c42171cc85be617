"""
Data-plane service.

After cell search the serving BS and the UE refine their beams over
finer codebooks and exchange data. This module computes the refined
beams, the data-plane SINR and rate, and Monte Carlo rate samples.

Available methods:
- data_codebooks(params, oversampling): Refinement codebooks (contain the cell-search beams).
- serving_channel(realization, serving_bs, slot, params, nlos_enabled): Single-path channel.
- refine_beams(channel, bs_codebook, ue_codebook): Best beam pair for a channel.
- data_sinr(realization, serving_bs, refined_beams, params, slot, rng, ...): Data SINR.
- achievable_rate(sinr, bw_data): Shannon rate in bit/s.
- simulate_data_plane(scheme_config, params, n_trials, base_seed, ...): Failure
  estimate plus post-refinement rates of successful trials.
- total_latency(estimate, packet_bits, frame, convention): Expected total latency.

Data-plane beams are ULA beam vectors for both antenna models.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from models.antenna import Codebook, PathChannel, RefinedBeams
from models.experiment import SchemeConfig
from models.results import LatencyReport
from models.system import FrameTiming, NetworkRealization, SystemParams
from services import beamforming_service, latency_service
from services.network_service import noise_power_watts, path_loss
from services.simulation_service import CHUNK_TRIALS, simulate_trial, wilson_interval

logger = logging.getLogger(__name__)

DATA_OVERSAMPLING = 4


@dataclass(frozen=True, eq=False)
class DataPlaneEstimate:
    """Failure estimate and data rates of the successful trials."""
    p_f: float
    ci_halfwidth: float
    rates_bps: np.ndarray
    trials: int

    @property
    def mean_rate(self) -> float:
        return float(self.rates_bps.mean()) if self.rates_bps.size else 0.0


def data_codebooks(params: SystemParams, oversampling: int = DATA_OVERSAMPLING) -> tuple[Codebook, Codebook]:
    """
    BS and UE refinement codebooks.

    Boresights are the cell-search boresights oversampled by an integer
    factor, so every cell-search beam is also a refinement beam.
    """
    if oversampling < 1:
        raise ValueError(f"oversampling must be a positive integer, got {oversampling}")
    return (
        beamforming_service.make_codebook(params.m_bs, params.n_bs * oversampling),
        beamforming_service.make_codebook(params.m_ue, params.n_ue * oversampling),
    )


def _path_gains(realization: NetworkRealization, slot: int, params: SystemParams, nlos_enabled: bool):
    los = realization.los_flags[:, slot]
    if nlos_enabled:
        return path_loss(realization.radius, los, params)
    return np.where(los, path_loss(realization.radius, True, params), 0.0)


def serving_channel(realization: NetworkRealization, serving_bs: int, slot: int,
                    params: SystemParams, nlos_enabled: bool = False) -> PathChannel:
    """Channel of one BS in one slot (blockage and fading of that slot)."""
    gains = _path_gains(realization, slot, params, nlos_enabled)
    return PathChannel(
        path_gain=float(gains[serving_bs]),
        fading=float(realization.fading[serving_bs, slot]),
        aoa=float(realization.azimuth[serving_bs]),
        aod=float(realization.aod[serving_bs]),
        m_ue=params.m_ue,
        m_bs=params.m_bs,
    )


def refine_beams(channel: PathChannel, bs_codebook: Codebook, ue_codebook: Codebook) -> RefinedBeams:
    """Beam pair with the largest link gain |w^H H v|^2."""
    return beamforming_service.refine_beams(channel, bs_codebook, ue_codebook)


def data_sinr(
    realization: NetworkRealization,
    serving_bs: int,
    refined_beams: RefinedBeams,
    params: SystemParams,
    slot: int,
    rng: np.random.Generator,
    bs_codebook: Optional[Codebook] = None,
    nlos_enabled: bool = False,
) -> float:
    """
    Data-plane SINR at the UE.

    Every other BS serves its own UE with a beam drawn uniformly from its
    refinement codebook. Blockage and fading are those of the given slot.
    Array responses are unit-norm, so without interferers the SINR is
    refined_beams.gain * p_BS / W.

    Args:
        realization: Sampled network.
        serving_bs: Index of the detected BS.
        refined_beams: Beam pair of the serving link.
        params: System parameters.
        slot: Slot whose channel state holds during data transmission.
        rng: Generator drawing the interferers' beams.
        bs_codebook: Interferers' codebook (defaults to data_codebooks()).
        nlos_enabled: Keep NLOS links when alpha_nlos is finite.

    Returns:
        Linear SINR.
    """
    if bs_codebook is None:
        bs_codebook, _ = data_codebooks(params)
    gains = _path_gains(realization, slot, params, nlos_enabled)
    channel = gains * realization.fading[:, slot]

    w = refined_beams.ue_beam
    ue_response = np.abs(beamforming_service.steering_matrix(params.m_ue, realization.azimuth)
                         @ w.coefficients.conj()) ** 2
    v = refined_beams.bs_beam
    serving_response = np.abs(np.vdot(
        beamforming_service.ula_response(params.m_bs, realization.aod[serving_bs]), v.coefficients
    )) ** 2
    signal = params.p_bs_data * channel[serving_bs] * ue_response[serving_bs] * serving_response

    others = np.delete(np.arange(realization.n_bs_points), serving_bs)
    interference = 0.0
    if others.size:
        picks = rng.integers(0, len(bs_codebook), others.size)
        bs_response = beamforming_service.codebook_response(bs_codebook, realization.aod[others])
        interferer_gain = bs_response[np.arange(others.size), picks]
        interference = float(np.sum(
            params.p_bs_data * channel[others] * ue_response[others] * interferer_gain
        ))
    return float(signal / (interference + noise_power_watts(params, "data")))


def achievable_rate(sinr, bw_data: float):
    """
    Shannon rate bw * log2(1 + SINR) in bit/s.

    Raises:
        ValueError: If any SINR is negative.
    """
    sinr_arr = np.asarray(sinr, dtype=float)
    if np.any(sinr_arr < 0):
        raise ValueError("SINR must be nonnegative")
    rate = bw_data * np.log2(1.0 + sinr_arr)
    if rate.ndim == 0:
        return float(rate)
    return rate


def _data_trial(params: SystemParams, scheme_config: SchemeConfig, seed: int,
                codebooks: tuple[Codebook, Codebook]) -> Optional[float]:
    record = simulate_trial(params, scheme_config, seed)
    outcome = record.outcome
    if not outcome.success:
        return None
    realization = record.realization
    slot = outcome.winning_slot
    channel = serving_channel(realization, outcome.winning_bs, slot, params, scheme_config.nlos_enabled)
    beams = refine_beams(channel, *codebooks)
    rng = np.random.default_rng([seed, 1])
    sinr = data_sinr(realization, outcome.winning_bs, beams, params, slot, rng,
                     codebooks[0], scheme_config.nlos_enabled)
    return achievable_rate(sinr, params.bw_data)


def _data_chunk(scheme_config: SchemeConfig, params: SystemParams, seeds: range,
                oversampling: int) -> tuple[int, list[float]]:
    codebooks = data_codebooks(params, oversampling)
    failures = 0
    rates = []
    for seed in seeds:
        rate = _data_trial(params, scheme_config, seed, codebooks)
        if rate is None:
            failures += 1
        else:
            rates.append(rate)
    return failures, rates


def simulate_data_plane(
    scheme_config: SchemeConfig,
    params: SystemParams,
    n_trials: int,
    base_seed: int = 0,
    oversampling: int = DATA_OVERSAMPLING,
    workers: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> DataPlaneEstimate:
    """
    Cell search followed by beam refinement and data transmission.

    Returns:
        DataPlaneEstimate with the failure fraction and the rates of the
        successful trials in seed order.
    """
    if n_trials < 100:
        raise ValueError(f"n_trials must be at least 100, got {n_trials}")
    chunks = [range(base_seed + lo, base_seed + min(lo + CHUNK_TRIALS, n_trials))
              for lo in range(0, n_trials, CHUNK_TRIALS)]
    failures = 0
    rates: list[float] = []
    done = 0

    def collect(seeds, result):
        nonlocal failures, done
        failures += result[0]
        rates.extend(result[1])
        done += len(seeds)
        if progress_callback:
            progress_callback(done, n_trials)

    if workers <= 1:
        for seeds in chunks:
            collect(seeds, _data_chunk(scheme_config, params, seeds, oversampling))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_data_chunk, scheme_config, params, seeds, oversampling)
                       for seeds in chunks]
            for seeds, future in zip(chunks, futures):
                collect(seeds, future.result())

    _, halfwidth = wilson_interval(failures, n_trials)
    estimate = DataPlaneEstimate(failures / n_trials, halfwidth, np.asarray(rates), n_trials)
    logger.info("%s data plane: P_f %.5f, mean rate %.4g bit/s over %d detections",
                scheme_config.scheme.value, estimate.p_f, estimate.mean_rate, len(rates))
    return estimate


def total_latency(estimate: DataPlaneEstimate, packet_bits: float, frame: FrameTiming,
                  convention: str = "mean_rate") -> LatencyReport:
    """
    Expected total latency under a rate convention.

    "mean_rate" plugs the mean rate into the latency formula;
    "mean_latency" averages the latency over the per-trial rates.
    """
    p_f = estimate.p_f
    e_ia = latency_service.expected_ia_latency(p_f, frame)
    if estimate.rates_bps.size == 0 or p_f >= 1.0:
        return LatencyReport(p_f, e_ia, frame, math.inf, 0.0, packet_bits)
    if convention == "mean_rate":
        rate = estimate.mean_rate
        e_total = latency_service.expected_total_latency(p_f, rate, packet_bits, frame)
    elif convention == "mean_latency":
        rate = estimate.mean_rate
        positive = estimate.rates_bps[estimate.rates_bps > 0]
        if positive.size < estimate.rates_bps.size:
            e_total = math.inf
        else:
            e_total = float(np.mean(latency_service.expected_total_latency(p_f, positive, packet_bits, frame)))
    else:
        raise ValueError(f"Unknown rate convention: {convention}")
    return LatencyReport(p_f, e_ia, frame, e_total, rate, packet_bits)
