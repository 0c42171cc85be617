"""
Network service.

This module samples network realizations around a typical UE at the
origin and provides the link-level quantities shared by the analytic and
Monte Carlo engines.

Available methods:
- sample_network(params, n_slots, seed): Sample a PPP topology with per-slot state.
- path_loss(r, is_los, params): Free-space-style path gain of a link.
- noise_power_watts(params, plane): Thermal noise of the control or data plane.
- noise_power_normalized(params, plane, include_bs_gain, normalized): Normalized noise.
- link_budget(r, is_los, params): Path gain, antenna gains and normalized noise.
- slot_sinr_sbp(realization, slot, params): Per-BS SINR with sectorized patterns.
- edge_snr(params): Mean SNR of a perfectly aligned LOS BS at the region edge.
"""
import logging
import math

import numpy as np

from models.system import LinkBudget, NetworkRealization, SystemParams
from services.antenna import get_antenna_model
from utils.units import thermal_noise_watts

logger = logging.getLogger(__name__)


def sample_network(params: SystemParams, n_slots: int, seed: int) -> NetworkRealization:
    """
    Sample a network realization.

    BSs form a PPP of density lambda_bs on a disc of radius region_radius.
    LOS flags and fading are redrawn in every slot unless frozen. In each
    scan cycle of n_bs slots every BS visits each of its directions once,
    in random order; the UE picks one random direction per cycle.

    Args:
        params: System parameters.
        n_slots: Number of mini-slots to cover.
        seed: Seed of the numpy Generator.

    Returns:
        NetworkRealization, identical for identical (params, n_slots, seed).

    Raises:
        ValueError: If n_slots < 1 or the expected BS count exceeds max_expected_bs.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be at least 1, got {n_slots}")
    if params.expected_bs_count > params.max_expected_bs:
        raise ValueError(
            f"expected BS count {params.expected_bs_count:.0f} exceeds max_expected_bs "
            f"{params.max_expected_bs:.0f}"
        )

    rng = np.random.default_rng(seed)
    count = int(rng.poisson(params.expected_bs_count))
    radius = params.region_radius * np.sqrt(1.0 - rng.random(count))
    azimuth = rng.uniform(0.0, 2.0 * np.pi, count)

    los_probability = np.exp(-params.beta * radius)[:, None]
    state_slots = 1 if params.frozen_blockage else n_slots
    los_flags = rng.random((count, state_slots)) < los_probability
    fading_slots = 1 if params.frozen_fading else n_slots
    fading = rng.exponential(1.0, (count, fading_slots))
    if params.frozen_blockage:
        los_flags = np.repeat(los_flags, n_slots, axis=1)
    if params.frozen_fading:
        fading = np.repeat(fading, n_slots, axis=1)

    n_cycles = -(-n_slots // params.n_bs)
    directions = np.tile(np.arange(params.n_bs), (count, 1))
    cycles = [rng.permuted(directions, axis=1) for _ in range(n_cycles)]
    if cycles and count:
        bs_boresight = np.concatenate(cycles, axis=1)[:, :n_slots]
    else:
        bs_boresight = np.zeros((count, n_slots), dtype=int)
    ue_boresight = rng.integers(0, params.n_ue, n_cycles)

    return NetworkRealization(
        radius=radius,
        azimuth=azimuth,
        los_flags=los_flags,
        fading=fading,
        bs_boresight=bs_boresight,
        ue_boresight=ue_boresight,
        seed=seed,
        cycle_length=params.n_bs,
    )


def path_loss(r, is_los, params: SystemParams):
    """
    Path gain (c / (4 pi r f_c))^alpha.

    Args:
        r: Link distance in m (scalar or array).
        is_los: LOS flag (scalar or array broadcastable with r).
        params: System parameters.

    Returns:
        Linear path gain; 0 for NLOS links when alpha_nlos is infinite.

    Raises:
        ValueError: If any distance is not positive.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("path_loss is singular at r <= 0")
    los = np.asarray(is_los, dtype=bool)
    ratio = params.wavelength_factor / r_arr
    los_gain = ratio ** params.alpha_los
    if math.isinf(params.alpha_nlos):
        nlos_gain = np.zeros_like(los_gain)
    else:
        nlos_gain = ratio ** params.alpha_nlos
    gain = np.where(los, los_gain, nlos_gain)
    if gain.ndim == 0:
        return float(gain)
    return gain


def noise_power_watts(params: SystemParams, plane: str = "control") -> float:
    """Thermal noise W of the control or data plane in watts."""
    if plane == "control":
        return thermal_noise_watts(params.bw_control, params.noise_figure_db)
    if plane == "data":
        return thermal_noise_watts(params.bw_data, params.noise_figure_db)
    raise ValueError(f"Unknown plane: {plane}")


def noise_power_normalized(
    params: SystemParams,
    plane: str = "control",
    include_bs_gain: bool = True,
    normalized: bool = False,
) -> float:
    """
    Noise power normalized to the received-signal scale.

    The noise W is divided by p_BS * G_UE, by the BS mainlobe gain when
    include_bs_gain is set, and by (c / 4 pi f_c)^alpha_los when the
    normalized r^-alpha form is requested.

    Args:
        params: System parameters.
        plane: "control" or "data".
        include_bs_gain: Divide by the BS mainlobe gain.
        normalized: Absorb the LOS path-loss constant.

    Returns:
        Normalized noise sigma^2.
    """
    noise = noise_power_watts(params, plane)
    power = params.p_bs_control if plane == "control" else params.p_bs_data
    sigma2 = noise / (power * params.mainlobe_gain_ue)
    if include_bs_gain:
        sigma2 /= params.mainlobe_gain_bs
    if normalized:
        sigma2 /= params.wavelength_factor ** params.alpha_los
    return sigma2


def link_budget(r: float, is_los: bool, params: SystemParams) -> LinkBudget:
    """Link budget of a mainlobe-aligned link at distance r."""
    return LinkBudget(
        path_gain=path_loss(r, is_los, params),
        antenna_gain_bs=params.mainlobe_gain_bs,
        antenna_gain_ue=params.mainlobe_gain_ue,
        noise_norm=noise_power_normalized(params, "control", params.include_bs_gain),
    )


def slot_sinr_sbp(realization: NetworkRealization, slot: int, params: SystemParams) -> np.ndarray:
    """
    Per-BS SINR in one slot with sectorized patterns.

    A BS outside the UE's current beam receives zero UE gain, so it adds
    neither signal nor interference.

    Args:
        realization: Sampled network.
        slot: Mini-slot index.
        params: System parameters.

    Returns:
        Array of SINR values, one per BS (empty for an empty realization).
    """
    if realization.n_bs_points == 0:
        return np.zeros(0)
    if not 0 <= slot < realization.n_slots:
        raise ValueError(f"slot {slot} outside realization of {realization.n_slots} slots")

    model = get_antenna_model("sbp", params)
    bs_table = model.gain_table(realization.aod, model.bs_codebook())
    ue_table = model.gain_table(realization.azimuth, model.ue_codebook())
    rows = np.arange(realization.n_bs_points)
    bs_gain = bs_table[rows, realization.bs_boresight[:, slot]]
    ue_gain = ue_table[:, realization.ue_beam_at(slot)]
    path = path_loss(realization.radius, realization.los_flags[:, slot], params)
    received = params.p_bs_control * bs_gain * ue_gain * realization.fading[:, slot] * path
    interference = np.clip(received.sum() - received, 0.0, None)
    return received / (interference + noise_power_watts(params, "control"))


def edge_snr(params: SystemParams) -> float:
    """Mean SNR of a LOS BS at the region edge with both mainlobes aligned."""
    path = path_loss(params.region_radius, True, params)
    gain = params.mainlobe_gain_bs * params.mainlobe_gain_ue
    return params.p_bs_control * gain * path / noise_power_watts(params, "control")
