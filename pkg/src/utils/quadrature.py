"""
Semi-infinite adaptive quadrature.

Integrals over [0, inf) are split into panels [0, s], [s, 2s], [2s, 4s], ...
each integrated with QUADPACK (scipy.integrate.quad, or quad_vec for
vector-valued integrands). Panels are appended until the newest one adds
less than truncation_cut of the running total; if that never happens
within max_panels, the remainder is integrated up to infinity in one
piece.

Available functions:
- integrate_semi_infinite(func, scale, spec, vector): Integrate over [0, inf).
- expit_ratio(log_numerator, alpha, v): x / (v^alpha + x) computed from log x.
- one_minus_power(x, n): 1 - (1 - x)^n without cancellation.
- panel_scale(log_s, alpha, beta): First-panel width for interference integrands.
"""
import logging
import math
import warnings
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning
from scipy.special import expit

from models.errors import QuadratureError
from models.results import QuadratureSpec

logger = logging.getLogger(__name__)


class Integral(NamedTuple):
    value: float | np.ndarray
    error: float
    evaluations: int


def _magnitude(value) -> float:
    return float(np.max(np.abs(value)))


def _panel(func: Callable, lo: float, hi: float, spec: QuadratureSpec, vector: bool) -> Integral:
    if vector:
        value, error, info = integrate.quad_vec(
            func, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, norm="max",
            limit=spec.max_subdivisions, full_output=True,
        )
        if not info.success:
            raise QuadratureError(
                f"quad_vec did not converge on [{lo}, {hi}] (error {error:.3g}, status {info.status})"
            )
        return Integral(np.asarray(value, dtype=float), float(error), int(info.neval))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        out = integrate.quad(
            func, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
            limit=spec.max_subdivisions, full_output=1,
        )
    value, error, info = out[0], out[1], out[2]
    if len(out) > 3:
        tolerance = max(spec.abs_tol, spec.rel_tol * abs(value))
        if error > 100.0 * tolerance:
            raise QuadratureError(f"quad did not converge on [{lo}, {hi}]: {out[3].strip()}")
        logger.debug("quad warning on [%g, %g] within slack: %s", lo, hi, out[3].strip())
    return Integral(float(value), float(error), int(info["neval"]))


def integrate_semi_infinite(
    func: Callable,
    scale: float,
    spec: QuadratureSpec,
    vector: bool = False,
) -> Integral:
    """
    Integrate func over [0, inf).

    Args:
        func: Integrand, scalar (or vector when vector=True) valued.
        scale: Width of the first panel; the integrand's characteristic length.
        spec: Quadrature settings.
        vector: Integrate a vector-valued integrand componentwise.

    Returns:
        Integral with value, accumulated error estimate and evaluation count.

    Raises:
        QuadratureError: If a panel fails to converge.
    """
    if not scale > 0 or not math.isfinite(scale):
        raise ValueError(f"panel scale must be positive and finite, got {scale}")

    total = 0.0
    error = 0.0
    evaluations = 0
    lo, hi = 0.0, float(scale)
    for _ in range(spec.max_panels):
        piece = _panel(func, lo, hi, spec, vector)
        total = total + piece.value
        error += piece.error
        evaluations += piece.evaluations
        if _magnitude(piece.value) <= spec.truncation_cut * _magnitude(total):
            return Integral(total, error, evaluations)
        lo, hi = hi, 2.0 * hi

    logger.debug("panel expansion exhausted at %g; integrating the tail to infinity", lo)
    piece = _panel(func, lo, np.inf, spec, vector)
    return Integral(total + piece.value, error + piece.error, evaluations + piece.evaluations)


def expit_ratio(log_numerator: float, alpha: float, v):
    """
    x / (v^alpha + x) with x = exp(log_numerator).

    Evaluated as a logistic function of log_numerator - alpha*log(v), which
    stays finite for the huge and tiny values met in path-loss ratios.
    """
    with np.errstate(divide="ignore"):
        return expit(log_numerator - alpha * np.log(v))


def one_minus_power(x, n):
    """1 - (1 - x)^n for x in [0, 1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.expm1(n * np.log1p(-np.asarray(x, dtype=float)))


def panel_scale(log_s: float, alpha: float, beta: float) -> float:
    """
    First-panel width for integrands like s e^{-beta v} v / (v^alpha + s).

    The ratio turns over at v = s^(1/alpha) and blockage cuts in at 1/beta.
    """
    scale = math.exp(min(max(log_s / alpha, -14.0), 16.0))
    if beta > 0:
        scale = min(scale, 1.0 / beta)
    return scale
