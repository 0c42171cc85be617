"""
Calibration service.

This module fits the sidelobe gain epsilon so that the sidelobe model
reproduces reference failure probabilities.

Available methods:
- calibrate_epsilon(anchors, params, n_c, parameter, spec): Fitted epsilon and residual.

Reference points:
- DENSITY_ANCHORS: Sidelobe-model failure probabilities at two BS densities
  under the default parameters.
"""
import logging
import math
from dataclasses import replace
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from models.errors import PrecisionLossError, QuadratureError
from models.results import CalibrationResult, QuadratureSpec
from models.system import SystemParams
from services.analytic_service import evaluate_failure

logger = logging.getLogger(__name__)

DENSITY_ANCHORS = ((1e-4, 0.60585), (1e-3, 0.0055886))

RESIDUAL_LIMIT = 0.01
_EDGE = 1e-6


def _model_failures(epsilon: float, anchors, params: SystemParams, n_c: Optional[int],
                    parameter: str, spec: Optional[QuadratureSpec]) -> np.ndarray:
    values = []
    for x, _ in anchors:
        point = replace(params, **{parameter: x, "epsilon": epsilon})
        values.append(evaluate_failure("sidelobe", point, n_c, spec).value)
    return np.asarray(values)


def calibrate_epsilon(
    anchors: Iterable[tuple[float, float]],
    params: SystemParams,
    n_c: Optional[int] = None,
    parameter: str = "lambda_bs",
    spec: Optional[QuadratureSpec] = None,
) -> CalibrationResult:
    """
    Fit epsilon by least squares on the sidelobe-model failure probability.

    Args:
        anchors: (parameter value, failure probability) pairs.
        params: Parameters shared by all anchors; epsilon is replaced.
        n_c: Slot budget (defaults to params.n_c).
        parameter: SystemParams field the anchor abscissae set.
        spec: Quadrature settings.

    Returns:
        CalibrationResult; status is "failed" when the RMS residual exceeds
        RESIDUAL_LIMIT. diagnostics holds (x, target, fitted) per anchor.

    Raises:
        ValueError: If fewer than two anchors are given or a target lies
            outside [0, 1].
    """
    anchors = tuple((float(x), float(p)) for x, p in anchors)
    if len(anchors) < 2:
        raise ValueError(f"calibration needs at least two anchors, got {len(anchors)}")
    if parameter not in SystemParams.field_names():
        raise ValueError(f"Unknown parameter: {parameter}")
    targets = np.array([p for _, p in anchors])
    if np.any((targets < 0) | (targets > 1)):
        raise ValueError("anchor failure probabilities must lie in [0, 1]")

    def objective(epsilon: float) -> float:
        try:
            fitted = _model_failures(epsilon, anchors, params, n_c, parameter, spec)
        except (QuadratureError, PrecisionLossError) as e:
            logger.debug("epsilon=%.6g not evaluable: %s", epsilon, e)
            return float(len(anchors))
        return float(np.sum((fitted - targets) ** 2))

    # epsilon < G_main holds for every epsilon < 1.
    result = minimize_scalar(objective, bounds=(_EDGE, 1.0 - _EDGE), method="bounded",
                             options={"xatol": 1e-7})
    epsilon = float(result.x)
    fitted = _model_failures(epsilon, anchors, params, n_c, parameter, spec)
    residual = math.sqrt(float(np.mean((fitted - targets) ** 2)))
    status = "ok" if residual <= RESIDUAL_LIMIT else "failed"
    diagnostics = tuple((x, p, float(f)) for (x, p), f in zip(anchors, fitted))

    if status == "failed":
        logger.warning("calibration failed: epsilon=%.6g leaves RMS residual %.4g", epsilon, residual)
    else:
        logger.info("calibrated epsilon=%.6g (RMS residual %.3g)", epsilon, residual)
    return CalibrationResult(epsilon, residual, status, diagnostics)
