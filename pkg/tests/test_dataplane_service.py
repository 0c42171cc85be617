import math
from dataclasses import replace

import numpy as np
import pytest

from models.experiment import AntennaKind, Scheme, SchemeConfig
from models.system import FrameTiming, NetworkRealization
from services import beamforming_service, dataplane_service, latency_service, network_service


# ============================================================
# Rates and codebooks
# ============================================================

@pytest.mark.parametrize("sinr, rate", [(0.0, 0.0), (1.0, 1e8), (3.0, 2e8)])
def test_achievable_rate(sinr, rate):
    assert dataplane_service.achievable_rate(sinr, 100e6) == pytest.approx(rate)


def test_achievable_rate_rejects_negative_sinr():
    with pytest.raises(ValueError):
        dataplane_service.achievable_rate(-0.5, 100e6)


def test_data_codebooks_contain_search_beams(reference_params):
    bs, ue = dataplane_service.data_codebooks(reference_params)
    assert len(bs) == 48 and len(ue) == 16
    search_bs = beamforming_service.make_codebook(reference_params.m_bs, reference_params.n_bs)
    search_ue = beamforming_service.make_codebook(reference_params.m_ue, reference_params.n_ue)
    np.testing.assert_allclose(bs.boresights[::4], search_bs.boresights)
    np.testing.assert_allclose(ue.boresights[::4], search_ue.boresights)


def test_data_codebooks_reject_zero_oversampling(reference_params):
    with pytest.raises(ValueError):
        dataplane_service.data_codebooks(reference_params, 0)


# ============================================================
# Data-plane SINR
# ============================================================

def test_refined_link_beats_noise(reference_params):
    params = replace(reference_params, lambda_bs=1e-3)
    realization = network_service.sample_network(params, 1, seed=4)
    los = np.flatnonzero(realization.los_flags[:, 0])
    serving = int(los[np.argmin(realization.radius[los])])
    channel = dataplane_service.serving_channel(realization, serving, 0, params)
    beams = dataplane_service.refine_beams(channel, *dataplane_service.data_codebooks(params))
    sinr = dataplane_service.data_sinr(realization, serving, beams, params, 0, np.random.default_rng(0))
    assert sinr > 0
    assert 0 < beams.gain <= channel.path_gain * channel.fading * (1 + 1e-9)


def _single_bs(params, radius, azimuth, los=True):
    return NetworkRealization(
        radius=np.array([radius]),
        azimuth=np.array([azimuth]),
        los_flags=np.array([[los]]),
        fading=np.array([[1.0]]),
        bs_boresight=np.array([[0]]),
        ue_boresight=np.array([0]),
        seed=0,
        cycle_length=params.n_bs,
    )


def _lone_link_sinr(params, realization):
    channel = dataplane_service.serving_channel(realization, 0, 0, params)
    beams = dataplane_service.refine_beams(channel, *dataplane_service.data_codebooks(params))
    sinr = dataplane_service.data_sinr(realization, 0, beams, params, 0, np.random.default_rng(0))
    return sinr, beams


def test_lone_aligned_link_has_path_loss_snr(reference_params):
    # UE boresight 0 and BS boresight pi are both codebook beams
    realization = _single_bs(reference_params, 50.0, 0.0)
    sinr, beams = _lone_link_sinr(reference_params, realization)
    snr = (network_service.path_loss(50.0, True, reference_params) * reference_params.p_bs_data
           / network_service.noise_power_watts(reference_params, "data"))
    assert beams.gain == pytest.approx(network_service.path_loss(50.0, True, reference_params), rel=1e-9)
    assert sinr == pytest.approx(snr, rel=1e-9)
    assert sinr == pytest.approx(0.601, rel=0.01)


def test_lone_link_snr_is_refined_gain_over_noise(reference_params):
    realization = _single_bs(reference_params, 50.0, 0.3)
    sinr, beams = _lone_link_sinr(reference_params, realization)
    noise = network_service.noise_power_watts(reference_params, "data")
    assert sinr == pytest.approx(beams.gain * reference_params.p_bs_data / noise, rel=1e-9)


def test_zero_serving_gain_gives_zero_sinr(reference_params):
    realization = _single_bs(reference_params, 50.0, 0.3, los=False)
    sinr, _ = _lone_link_sinr(reference_params, realization)
    assert sinr == 0.0


def test_blocked_serving_link_has_zero_channel(reference_params):
    realization = network_service.sample_network(reference_params, 1, seed=4)
    blocked = int(np.flatnonzero(~realization.los_flags[:, 0])[0])
    channel = dataplane_service.serving_channel(realization, blocked, 0, reference_params)
    assert channel.path_gain == 0.0


# ============================================================
# Monte Carlo and total latency
# ============================================================

def test_simulation_collects_rates_of_detections(reference_params):
    params = replace(reference_params, lambda_bs=1e-3)
    estimate = dataplane_service.simulate_data_plane(SchemeConfig(), params, 100, base_seed=3)
    assert estimate.trials == 100
    assert len(estimate.rates_bps) == round(100 * (1 - estimate.p_f))
    assert np.all(estimate.rates_bps >= 0)
    assert estimate.mean_rate > 0


def test_simulation_is_reproducible(reference_params):
    params = replace(reference_params, lambda_bs=1e-3)
    config = SchemeConfig(scheme=Scheme.EXHAUSTIVE, antenna_model=AntennaKind.ULA)
    a = dataplane_service.simulate_data_plane(config, params, 100, base_seed=8)
    b = dataplane_service.simulate_data_plane(config, params, 100, base_seed=8)
    assert a.p_f == b.p_f
    np.testing.assert_array_equal(a.rates_bps, b.rates_bps)


def _estimate(rates, p_f=0.1):
    return dataplane_service.DataPlaneEstimate(p_f, 0.01, np.asarray(rates, dtype=float), 1000)


def test_mean_rate_convention_uses_the_formula():
    frame = FrameTiming()
    report = dataplane_service.total_latency(_estimate([1e8, 3e8]), 1e6, frame, "mean_rate")
    assert report.rate_bps == pytest.approx(2e8)
    assert report.e_total_ms == pytest.approx(latency_service.expected_total_latency(0.1, 2e8, 1e6, frame))
    assert report.e_ia_ms == pytest.approx(latency_service.expected_ia_latency(0.1, frame))


def test_mean_latency_convention_is_not_below_mean_rate():
    frame = FrameTiming()
    estimate = _estimate([1e6, 5e6, 2e8])
    by_rate = dataplane_service.total_latency(estimate, 1e6, frame, "mean_rate").e_total_ms
    by_latency = dataplane_service.total_latency(estimate, 1e6, frame, "mean_latency").e_total_ms
    assert by_latency >= by_rate


def test_zero_rate_detection_makes_mean_latency_infinite():
    report = dataplane_service.total_latency(_estimate([0.0, 1e8]), 1e6, FrameTiming(), "mean_latency")
    assert math.isinf(report.e_total_ms)


def test_no_detections_give_infinite_total_latency():
    report = dataplane_service.total_latency(_estimate([], p_f=1.0), 1e6, FrameTiming())
    assert math.isinf(report.e_total_ms)
    assert math.isinf(report.e_ia_ms)


def test_unknown_rate_convention():
    with pytest.raises(ValueError, match="rate convention"):
        dataplane_service.total_latency(_estimate([1e8]), 1e6, FrameTiming(), "median")


@pytest.mark.slow
def test_random_search_beats_exhaustive_search_for_small_packets(reference_params):
    params = replace(reference_params, lambda_bs=1e-3)
    runs = []
    for scheme in (Scheme.RANDOM, Scheme.EXHAUSTIVE):
        config = SchemeConfig(scheme=scheme, antenna_model=AntennaKind.ULA)
        estimate = dataplane_service.simulate_data_plane(config, params, 2000, base_seed=2, workers=4)
        runs.append((estimate, config.frame()))
    (rb, rb_frame), (es, es_frame) = runs
    for packet_bits, convention in ((1e3, "mean_rate"), (1e3, "mean_latency"), (1e4, "mean_rate")):
        assert (dataplane_service.total_latency(rb, packet_bits, rb_frame, convention).e_total_ms
                < dataplane_service.total_latency(es, packet_bits, es_frame, convention).e_total_ms)
