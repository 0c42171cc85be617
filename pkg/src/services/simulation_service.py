"""
Simulation service.

This module runs Monte Carlo trials of the three cell-search schemes and
estimates detection failure probabilities.

Available methods:
- run_trial_rb(params, scheme_config, seed): One random-beamforming trial.
- run_trial_es(params, scheme_config, seed): One exhaustive-search trial.
- run_trial_is(params, scheme_config, seed): One iterative-search trial.
- simulate_trial(params, scheme_config, seed): Trial of the configured scheme,
  with the realization it ran on.
- estimate_failure(scheme_config, params, n_trials, base_seed, workers, progress_callback):
  Failure probability with a Wilson 95% interval.
- wilson_interval(failures, n_trials): Wilson score interval.

Every BS transmits in every slot. A slot's SINR for BS i is its received
power over the power of all other BSs plus noise. Trials are seeded with
base_seed + i and reduced through integer counts, so estimates do not
depend on the number of workers.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.stats import norm

from models.experiment import Scheme, SchemeConfig
from models.results import DetectionOutcome
from models.system import NetworkRealization, SystemParams
from services.antenna import get_antenna_model
from services.network_service import edge_snr, noise_power_watts, path_loss, sample_network

logger = logging.getLogger(__name__)

CHUNK_TRIALS = 500


class TrialRecord(NamedTuple):
    outcome: DetectionOutcome
    realization: NetworkRealization


class _LinkState:
    """Per-trial gain tables and per-slot path/fading products."""

    def __init__(self, realization: NetworkRealization, params: SystemParams, scheme_config: SchemeConfig):
        self.model = get_antenna_model(scheme_config.antenna_model, params)
        self.realization = realization
        self.params = params
        self.rows = np.arange(realization.n_bs_points)
        self.bs_table = self.model.gain_table(realization.aod, self.model.bs_codebook())
        self.ue_table = self.model.gain_table(realization.azimuth, self.model.ue_codebook())
        los = realization.los_flags
        radius = realization.radius[:, None]
        if scheme_config.nlos_enabled:
            path = path_loss(np.broadcast_to(radius, los.shape), los, params)
        else:
            path = np.where(los, path_loss(np.broadcast_to(radius, los.shape), True, params), 0.0)
        self.channel = params.p_bs_control * path * realization.fading
        self.noise = noise_power_watts(params, "control")

    def wide_table(self, scheme_config: SchemeConfig) -> np.ndarray:
        codebook = self.model.wide_bs_codebook(
            scheme_config.stage1_beamwidth, scheme_config.stage1_active_elements
        )
        return self.model.gain_table(self.realization.aod, codebook)

    def sinr(self, slots: np.ndarray, bs_beams: np.ndarray, ue_beams: np.ndarray,
             bs_table: Optional[np.ndarray] = None) -> np.ndarray:
        """
        SINR of every BS in the given slots.

        Args:
            slots: Slot indices (T,).
            bs_beams: Beam of every BS per slot, shape (N, T) or (T,) when synchronized.
            ue_beams: UE beam per slot (T,).
            bs_table: BS gain table (defaults to the narrow codebook).

        Returns:
            Array (N, T).
        """
        table = self.bs_table if bs_table is None else bs_table
        if bs_beams.ndim == 1:
            bs_gain = table[:, bs_beams]
        else:
            bs_gain = table[self.rows[:, None], bs_beams]
        received = self.channel[:, slots] * bs_gain * self.ue_table[:, ue_beams]
        interference = np.clip(received.sum(axis=0, keepdims=True) - received, 0.0, None)
        return received / (interference + self.noise)


def _first_success(sinr: np.ndarray, threshold: float, slot_offset: int = 0) -> DetectionOutcome:
    """Outcome of a sequence of slots: success at the first slot reaching the threshold."""
    if sinr.size == 0:
        return DetectionOutcome(False, None, None, 0.0)
    best = sinr.max(axis=0)
    hits = np.flatnonzero(best >= threshold)
    if hits.size:
        slot = int(hits[0])
        return DetectionOutcome(True, slot + slot_offset, int(np.argmax(sinr[:, slot])), float(best[slot]))
    return DetectionOutcome(False, None, None, float(best.max()))


def _empty_outcome() -> DetectionOutcome:
    return DetectionOutcome(False, None, None, 0.0)


def _trial_rb(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> TrialRecord:
    budget = scheme_config.slot_budget(params)
    realization = sample_network(params, max(budget, 1), seed)
    if budget == 0 or realization.n_bs_points == 0:
        return TrialRecord(_empty_outcome(), realization)
    state = _LinkState(realization, params, scheme_config)
    slots = np.arange(budget)
    ue_beams = realization.ue_boresight[slots // realization.cycle_length]
    sinr = state.sinr(slots, realization.bs_boresight[:, :budget], ue_beams)
    return TrialRecord(_first_success(sinr, params.sinr_threshold), realization)


def _trial_es(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> TrialRecord:
    sweep = scheme_config.sweep_slots(params)
    budget = scheme_config.slot_budget(params)
    realization = sample_network(params, sweep, seed)
    if budget < sweep or realization.n_bs_points == 0:
        return TrialRecord(_empty_outcome(), realization)
    state = _LinkState(realization, params, scheme_config)
    slots = np.arange(sweep)
    # UE beam outer loop, BS beam inner loop, all BSs synchronized.
    sinr = state.sinr(slots, slots % params.n_bs, slots // params.n_bs)
    return TrialRecord(_first_success(sinr, params.sinr_threshold), realization)


def _trial_is(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> TrialRecord:
    n_wide = scheme_config.stage1_beams
    stage1 = n_wide * params.n_ue
    sweep = scheme_config.sweep_slots(params)
    budget = scheme_config.slot_budget(params)
    realization = sample_network(params, sweep, seed)
    if budget < sweep or realization.n_bs_points == 0:
        return TrialRecord(_empty_outcome(), realization)
    state = _LinkState(realization, params, scheme_config)
    threshold = params.sinr_threshold

    first = np.arange(stage1)
    ue_first = first // n_wide
    sinr1 = state.sinr(first, first % n_wide, ue_first, state.wide_table(scheme_config))
    best1 = sinr1.max(axis=0)
    if best1.max() < threshold:
        return TrialRecord(DetectionOutcome(False, None, None, float(best1.max())), realization)
    ue_beam = int(ue_first[int(np.argmax(best1))])

    second = np.arange(stage1, sweep)
    bs_beams = second - stage1
    sinr2 = state.sinr(second, bs_beams, np.full(second.shape, ue_beam))
    return TrialRecord(_first_success(sinr2, threshold, slot_offset=stage1), realization)


_TRIALS = {
    Scheme.RANDOM: _trial_rb,
    Scheme.EXHAUSTIVE: _trial_es,
    Scheme.ITERATIVE: _trial_is,
}


def simulate_trial(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> TrialRecord:
    """Run one trial of the configured scheme and keep its realization."""
    return _TRIALS[scheme_config.scheme](params, scheme_config, seed)


def run_trial_rb(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> DetectionOutcome:
    """
    One random-beamforming trial.

    Each BS visits its directions in a random order per scan cycle; the UE
    keeps one random beam per cycle. The trial succeeds at the first slot
    in which some BS reaches the SINR threshold.
    """
    if scheme_config.scheme is not Scheme.RANDOM:
        raise ValueError(f"run_trial_rb needs the rb scheme, got {scheme_config.scheme.value}")
    return _trial_rb(params, scheme_config, seed).outcome


def run_trial_es(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> DetectionOutcome:
    """
    One exhaustive-search trial.

    All BSs sweep their N_BS beams synchronously for each of the N_UE UE
    beams. A budget shorter than the sweep fails.
    """
    if scheme_config.scheme is not Scheme.EXHAUSTIVE:
        raise ValueError(f"run_trial_es needs the es scheme, got {scheme_config.scheme.value}")
    return _trial_es(params, scheme_config, seed).outcome


def run_trial_is(params: SystemParams, scheme_config: SchemeConfig, seed: int) -> DetectionOutcome:
    """
    One iterative-search trial.

    Stage 1 sweeps wide BS beams against every UE beam and must reach the
    threshold. The UE then keeps its best beam while the BSs sweep their
    narrow beams; success is decided in stage 2.
    """
    if scheme_config.scheme is not Scheme.ITERATIVE:
        raise ValueError(f"run_trial_is needs the is scheme, got {scheme_config.scheme.value}")
    return _trial_is(params, scheme_config, seed).outcome


def _count_failures(scheme_config: SchemeConfig, params: SystemParams, seeds: range) -> int:
    trial = _TRIALS[scheme_config.scheme]
    return sum(0 if trial(params, scheme_config, seed).outcome.success else 1 for seed in seeds)


def wilson_interval(failures: int, n_trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """
    Wilson score interval of a binomial proportion.

    Returns:
        (center, halfwidth) of the interval.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be positive, got {n_trials}")
    z = norm.ppf(0.5 + confidence / 2.0)
    p = failures / n_trials
    denominator = 1.0 + z * z / n_trials
    center = (p + z * z / (2.0 * n_trials)) / denominator
    halfwidth = z / denominator * math.sqrt(p * (1.0 - p) / n_trials + z * z / (4.0 * n_trials ** 2))
    return center, halfwidth


def estimate_failure(
    scheme_config: SchemeConfig,
    params: SystemParams,
    n_trials: int,
    base_seed: int = 0,
    workers: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> tuple[float, float]:
    """
    Estimate the detection failure probability of a scheme.

    Args:
        scheme_config: Scheme settings.
        params: System parameters.
        n_trials: Number of trials (at least 100).
        base_seed: Trial i uses seed base_seed + i.
        workers: Worker processes; 1 runs in-process.
        progress_callback: Optional callback(done_trials, n_trials).

    Returns:
        (estimate, ci_halfwidth): failure fraction and Wilson 95% half-width.

    Raises:
        ValueError: If n_trials < 100.
    """
    if n_trials < 100:
        raise ValueError(f"n_trials must be at least 100, got {n_trials}")
    snr = edge_snr(params)
    if snr >= params.sinr_threshold / 100.0:
        logger.warning("region edge SNR %.3g is not below T/100; truncation may bias estimates", snr)

    chunks = [range(base_seed + lo, base_seed + min(lo + CHUNK_TRIALS, n_trials))
              for lo in range(0, n_trials, CHUNK_TRIALS)]
    failures = 0
    done = 0
    if workers <= 1:
        for seeds in chunks:
            failures += _count_failures(scheme_config, params, seeds)
            done += len(seeds)
            if progress_callback:
                progress_callback(done, n_trials)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_count_failures, scheme_config, params, seeds) for seeds in chunks]
            for seeds, future in zip(chunks, futures):
                failures += future.result()
                done += len(seeds)
                if progress_callback:
                    progress_callback(done, n_trials)

    estimate = failures / n_trials
    _, halfwidth = wilson_interval(failures, n_trials)
    logger.info("%s/%s: %d of %d trials failed (%.5f +/- %.5f)",
                scheme_config.scheme.value, scheme_config.antenna_model.value,
                failures, n_trials, estimate, halfwidth)
    return estimate, halfwidth
