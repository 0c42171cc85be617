import math
from dataclasses import replace

import numpy as np
import pytest

from models.experiment import AntennaKind, SchemeConfig
from models.system import FrameTiming
from services import latency_service
from services.simulation_service import estimate_failure


# ============================================================
# Initial-access latency
# ============================================================

def test_latency_without_failures_is_burst_plus_access():
    assert latency_service.expected_ia_latency(0.0, FrameTiming()) == pytest.approx(2.5)


def test_random_beamforming_reference_latency():
    assert latency_service.expected_ia_latency(0.56825, FrameTiming()) == pytest.approx(28.823, abs=1e-3)


def test_exhaustive_search_latency_without_failures():
    assert latency_service.expected_ia_latency(0.0, FrameTiming.for_ss_blocks(64)) == pytest.approx(6.25)


def test_adapted_frame_reference_latency():
    frame = FrameTiming.adapted(1)
    assert latency_service.expected_ia_latency(0.3784, frame) == pytest.approx(12.331, abs=1e-3)


def test_certain_failure_gives_infinite_latency():
    assert math.isinf(latency_service.expected_ia_latency(1.0, FrameTiming()))


@pytest.mark.parametrize("p_f", [-0.1, 1.1])
def test_failure_probability_out_of_range(p_f):
    with pytest.raises(ValueError):
        latency_service.expected_ia_latency(p_f, FrameTiming())


def test_latency_grows_with_failure():
    frame = FrameTiming()
    values = [latency_service.expected_ia_latency(p, frame) for p in (0.0, 0.2, 0.5, 0.9)]
    assert values == sorted(values)


def test_report_carries_inputs():
    report = latency_service.ia_report(0.2, FrameTiming())
    assert report.p_f == 0.2
    assert report.e_ia_ms == pytest.approx(7.5)
    assert report.e_total_ms is None


# ============================================================
# Total latency
# ============================================================

def test_small_packet_total_latency_for_exhaustive_search():
    frame = FrameTiming.for_ss_blocks(64)
    latency = latency_service.expected_total_latency(0.1, 1e9, 1e3, frame)
    assert latency == pytest.approx(8.47, abs=0.3)
    assert latency == pytest.approx(20 / 9 + 6.25 + 1e-3, rel=1e-9)


def test_total_latency_is_a_staircase():
    # 1 Mbit/s fills the 17.5 ms data window with 17500 bits
    frame = FrameTiming()
    one_frame = latency_service.expected_total_latency(0.0, 1e6, 17500, frame)
    two_frames = latency_service.expected_total_latency(0.0, 1e6, 17501, frame)
    assert one_frame == pytest.approx(2.5 + 17.5)
    assert two_frames - one_frame == pytest.approx(2.5 + 1e-3)


def test_total_latency_is_nondecreasing_in_packet_size():
    frame = FrameTiming()
    sizes = np.logspace(3, 9, 60)
    values = [latency_service.expected_total_latency(0.3, 2e8, s, frame) for s in sizes]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_total_latency_accepts_rate_arrays():
    values = latency_service.expected_total_latency(0.0, np.array([1e6, 2e6]), 1000, FrameTiming())
    np.testing.assert_allclose(values, [3.5, 3.0])


def test_total_latency_rejects_zero_rate():
    with pytest.raises(ValueError):
        latency_service.expected_total_latency(0.0, 0.0, 1000, FrameTiming())


def test_total_latency_is_infinite_on_certain_failure():
    assert math.isinf(latency_service.expected_total_latency(1.0, 1e6, 1000, FrameTiming()))


# ============================================================
# Beam-count scan
# ============================================================

def _decaying_failure(params, n_c):
    return math.exp(-params.n_bs / 2.0)


def _latency(n_bs):
    return latency_service.expected_ia_latency(math.exp(-n_bs / 2.0), FrameTiming.adapted(n_bs))


def test_scan_picks_lowest_latency(reference_params):
    best, scan = latency_service.optimize_beamwidth(reference_params, 1, 1.0, range(1, 21), _decaying_failure)
    expected = min(range(1, 21), key=_latency)
    assert best == expected
    assert scan.feasible
    assert scan.e_ia_ms == pytest.approx(_latency(expected))
    assert [n for n, _ in scan.grid] == list(range(1, 21))


def test_scan_respects_failure_constraint(reference_params):
    best, scan = latency_service.optimize_beamwidth(reference_params, 1, 0.01, range(1, 21), _decaying_failure)
    assert best == 10
    assert scan.grid[best - 1][1].p_f <= 0.01


def test_scan_without_feasible_point(reference_params):
    best, scan = latency_service.optimize_beamwidth(reference_params, 1, 1e-9, range(1, 21), _decaying_failure)
    assert best is None
    assert not scan.feasible
    assert scan.min_failure_n_bs == 20
    assert scan.min_failure == pytest.approx(math.exp(-10.0))


def test_scan_listens_k_cycles(reference_params):
    seen = []

    def record(params, n_c):
        seen.append((params.n_bs, params.m_bs, n_c))
        return 0.5

    latency_service.optimize_beamwidth(reference_params, 3, 1.0, [2, 5], record)
    assert sorted(seen) == [(2, 2, 6), (5, 5, 15)]


def test_scan_threads_match_serial(reference_params):
    serial = latency_service.optimize_beamwidth(reference_params, 1, 1.0, range(1, 11), _decaying_failure)
    threaded = latency_service.optimize_beamwidth(reference_params, 1, 1.0, range(1, 11), _decaying_failure,
                                                  workers=3)
    assert serial == threaded


def test_scan_rejects_empty_range(reference_params):
    with pytest.raises(ValueError):
        latency_service.optimize_beamwidth(reference_params, 1, 1.0, [])


@pytest.mark.slow
def test_dense_network_optimum_with_simulated_ula(reference_params):
    params = replace(reference_params, lambda_bs=1e-3)
    config = SchemeConfig(antenna_model=AntennaKind.ULA)

    def simulated(point, n_c):
        return estimate_failure(config, point, 5000, base_seed=1, workers=4)[0]

    best, scan = latency_service.optimize_beamwidth(params, 1, 1.0, range(1, 16), simulated)
    assert best in (6, 7, 9)
    assert scan.e_ia_ms == pytest.approx(1.808, rel=0.1)
    latencies = [report.e_ia_ms for _, report in scan.grid]
    lowest = latencies.index(min(latencies))
    # Monte Carlo noise allows small wiggles around the trend
    assert all(a >= b - 0.05 for a, b in zip(latencies[:lowest], latencies[1:lowest + 1]))
    assert all(b >= a - 0.05 for a, b in zip(latencies[lowest:], latencies[lowest + 1:]))
