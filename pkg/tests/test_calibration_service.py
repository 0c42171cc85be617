from dataclasses import replace

import pytest

from services import calibration_service
from services.analytic_service import evaluate_failure, failure_prob_los, failure_prob_sidelobe


@pytest.mark.parametrize("anchors", [[], [(1e-4, 0.6)]])
def test_too_few_anchors(reference_params, anchors):
    with pytest.raises(ValueError, match="at least two anchors"):
        calibration_service.calibrate_epsilon(anchors, reference_params)


def test_targets_must_be_probabilities(reference_params):
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        calibration_service.calibrate_epsilon([(1e-4, 0.6), (1e-3, 1.2)], reference_params)


def test_unknown_parameter(reference_params):
    with pytest.raises(ValueError, match="Unknown parameter"):
        calibration_service.calibrate_epsilon([(1, 0.6), (2, 0.5)], reference_params, parameter="density")


@pytest.mark.slow
def test_recovers_epsilon_from_synthetic_anchors(reference_params, fast_spec):
    truth = 0.05
    anchors = []
    for lam in (1e-4, 1e-3):
        point = replace(reference_params, lambda_bs=lam, epsilon=truth)
        anchors.append((lam, evaluate_failure("sidelobe", point, spec=fast_spec).value))
    result = calibration_service.calibrate_epsilon(anchors, reference_params, spec=fast_spec)
    assert result.status == "ok"
    assert result.epsilon == pytest.approx(truth, abs=2e-3)
    assert result.residual_rms < 1e-4
    assert [x for x, _, _ in result.diagnostics] == [1e-4, 1e-3]


@pytest.mark.slow
def test_reference_anchors_fit_within_tolerance(reference_params):
    result = calibration_service.calibrate_epsilon(calibration_service.DENSITY_ANCHORS, reference_params)
    assert 0 < result.epsilon < 1
    assert result.residual_rms <= calibration_service.RESIDUAL_LIMIT


@pytest.mark.slow
def test_calibrated_sidelobe_curve_passes_through_the_sparse_anchor(reference_params):
    result = calibration_service.calibrate_epsilon(calibration_service.DENSITY_ANCHORS, reference_params)
    assert result.status == "ok"
    point = replace(reference_params, lambda_bs=1e-4, epsilon=result.epsilon)
    failure = failure_prob_sidelobe(point)
    assert failure == pytest.approx(0.60585, abs=0.015)
    assert failure == pytest.approx(result.diagnostics[0][2], abs=1e-6)
    assert failure < failure_prob_los(replace(reference_params, lambda_bs=1e-4))
