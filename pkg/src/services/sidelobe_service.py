"""
Sidelobe detection service.

A BS that does not point its mainlobe at the UE still reaches it through
its sidelobe in every slot of a scan cycle. The desired signal and the
sidelobe interference then come from the same locations in every slot,
so the per-slot detection events are correlated. This module evaluates
the joint success probability over n slots, the probability that at
least one of them succeeds, and the resulting sidelobe detection
probability.

Available methods:
- p_joint_sidelobe(n, r, params, spec): Probability that all n slots succeed.
- joint_sidelobe_profile(n, r, params, spec): P^1..P^n with error bounds.
- q_selection(n, r, params, spec): Probability that at least one of n slots succeeds.
- selection_probability(n, r, params, spec, sample): q_selection with error and provenance.
- p_success_sidelobe(n, params, spec): Sidelobe detection probability over n slots.

Available classes:
- SidelobeTierSample: Fixed sample of sidelobe-tier layouts for the
  complementary Monte Carlo estimator of the selection probability.
"""
import logging
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate
from scipy.special import comb, expit

from models.errors import PrecisionLossError, QuadratureError
from models.results import AnalyticResult, QuadratureSpec
from models.system import SystemParams
from services.network_service import noise_power_normalized
from utils.quadrature import expit_ratio, integrate_semi_infinite, panel_scale, one_minus_power

logger = logging.getLogger(__name__)

CANCELLATION_TOLERANCE = 1e-4


class SelectionValue(NamedTuple):
    value: float
    error: float
    estimator_backed: bool


def _require_sidelobe(params: SystemParams):
    if params.epsilon <= 0:
        raise ValueError("sidelobe analysis needs epsilon > 0")


def _sidelobe_noise(params: SystemParams) -> float:
    # Signal gain epsilon sits in delta(r); only the UE gain and path constant divide W.
    return noise_power_normalized(params, "control", include_bs_gain=False, normalized=True)


def _log_mainlobe_ratio(r: float, params: SystemParams) -> float:
    g_star = params.mainlobe_gain_bs - params.epsilon
    return (math.log(params.sinr_threshold * g_star / params.epsilon)
            + params.alpha_los * math.log(r))


def _mainlobe_tier_exponent(r: float, params: SystemParams, spec: QuadratureSpec):
    """Per-slot exponent of the independent mainlobe interference."""
    density = params.theta_ue * params.lambda_bs / params.n_bs
    log_ratio = _log_mainlobe_ratio(r, params)
    alpha, beta = params.alpha_los, params.beta

    def integrand(t):
        return expit_ratio(log_ratio, alpha, t) * math.exp(-beta * t) * t

    scale = panel_scale(log_ratio, alpha, beta)
    result = integrate_semi_infinite(integrand, scale, spec)
    return density * result.value, density * result.error


def _correlated_integrals(ns: np.ndarray, r: float, params: SystemParams, spec: QuadratureSpec):
    """Integral over u of 1 - (1 - x(u))^k for each k in ns."""
    alpha = params.alpha_los
    decay = params.beta * r * params.sinr_threshold ** (1.0 / alpha)

    def integrand(u):
        with np.errstate(over="ignore"):
            x = np.exp(-decay * np.sqrt(u)) / (1.0 + np.power(u, alpha / 2.0))
        return one_minus_power(x, ns)

    return integrate_semi_infinite(integrand, 1.0, spec, vector=True)


def joint_sidelobe_profile(n: int, r: float, params: SystemParams, spec: Optional[QuadratureSpec] = None):
    """
    Joint success probabilities P^1..P^n at serving distance r.

    The interference splits into a sidelobe part (same BSs in all slots,
    gain epsilon) and a mainlobe excess G_main - epsilon from BSs whose
    mainlobe hits the UE, independent across slots.

    Args:
        n: Largest slot count.
        r: Distance of the serving BS in m.
        params: System parameters (epsilon > 0).
        spec: Quadrature settings.

    Returns:
        (probabilities, errors): arrays of length n, entry k-1 for P^k.
    """
    _require_sidelobe(params)
    if n < 1:
        raise ValueError(f"slot count must be at least 1, got {n}")
    if r <= 0:
        raise ValueError(f"serving distance must be positive, got {r}")
    spec = spec or QuadratureSpec()
    alpha, threshold = params.alpha_los, params.sinr_threshold
    if params.beta == 0 and alpha <= 2:
        raise ValueError("interference integral diverges for beta = 0 and alpha <= 2")

    ns = np.arange(1, n + 1, dtype=float)
    correlated = _correlated_integrals(ns, r, params, spec)
    factor = 0.5 * params.theta_ue * params.lambda_bs * r ** 2 * threshold ** (2.0 / alpha)
    mainlobe, mainlobe_error = _mainlobe_tier_exponent(r, params, spec)
    noise = threshold * r ** alpha * _sidelobe_noise(params) / params.epsilon

    exponent = factor * np.asarray(correlated.value) + ns * (mainlobe + noise)
    exponent_error = factor * correlated.error + ns * mainlobe_error
    probabilities = np.exp(-exponent)
    errors = probabilities * (np.expm1(exponent_error) + 4.0 * np.finfo(float).eps)
    return probabilities, errors


def p_joint_sidelobe(n: int, r: float, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Probability that the sidelobe SINR from a BS at distance r exceeds the
    threshold in all of n slots.

    Raises:
        ValueError: If epsilon is 0 or n < 1.
    """
    probabilities, _ = joint_sidelobe_profile(n, r, params, spec)
    return float(probabilities[-1])


class SidelobeTierSample:
    """
    Fixed sample of sidelobe-tier layouts.

    Given the layout, slots succeed independently with a probability p
    that depends only on the layout, so the selection probability is
    1 - E[(1 - p)^n]. The same layouts are reused for every r, so the
    estimate is a smooth function of r. BSs beyond region_radius enter
    through their mean contribution.
    """

    def __init__(self, params: SystemParams, samples: int, seed: int):
        _require_sidelobe(params)
        if samples < 2:
            raise ValueError(f"samples must be at least 2, got {samples}")
        rng = np.random.default_rng(seed)
        self.params = params
        self.samples = samples
        area = 0.5 * params.theta_ue * params.region_radius ** 2
        counts = rng.poisson(params.lambda_bs * area, samples)
        self.owner = np.repeat(np.arange(samples), counts)
        self.radius = params.region_radius * np.sqrt(rng.random(int(counts.sum())))
        self.radius = np.maximum(self.radius, 1e-9)
        self.los_probability = np.exp(-params.beta * self.radius)

    def _far_field(self, r: float, spec: QuadratureSpec) -> float:
        params = self.params
        log_s = math.log(params.sinr_threshold) + params.alpha_los * math.log(r)

        def integrand(t):
            return expit_ratio(log_s, params.alpha_los, t) * math.exp(-params.beta * t) * t

        value, _ = integrate.quad(integrand, params.region_radius, np.inf,
                                  epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                                  limit=spec.max_subdivisions)
        return params.theta_ue * params.lambda_bs * value

    def slot_probability(self, r: float, spec: QuadratureSpec) -> np.ndarray:
        """Per-layout success probability of one slot at serving distance r."""
        params = self.params
        log_s = math.log(params.sinr_threshold) + params.alpha_los * math.log(r)
        hit = self.los_probability * expit(log_s - params.alpha_los * np.log(self.radius))
        log_p = np.bincount(self.owner, weights=np.log1p(-hit), minlength=self.samples)
        mainlobe, _ = _mainlobe_tier_exponent(r, params, spec)
        noise = params.sinr_threshold * r ** params.alpha_los * _sidelobe_noise(params) / params.epsilon
        return np.exp(log_p - self._far_field(r, spec) - mainlobe - noise)

    def selection(self, n: int, r: float, spec: QuadratureSpec) -> tuple[float, float]:
        """Estimate of the selection probability and its standard error."""
        outcomes = one_minus_power(self.slot_probability(r, spec), n)
        return float(outcomes.mean()), float(outcomes.std(ddof=1) / math.sqrt(self.samples))

    def joint(self, n: int, r: float, spec: QuadratureSpec) -> tuple[float, float]:
        """Estimate of the joint probability P^n and its standard error."""
        outcomes = self.slot_probability(r, spec) ** n
        return float(outcomes.mean()), float(outcomes.std(ddof=1) / math.sqrt(self.samples))


def selection_probability(
    n: int,
    r: float,
    params: SystemParams,
    spec: Optional[QuadratureSpec] = None,
    sample: Optional[SidelobeTierSample] = None,
) -> SelectionValue:
    """
    Probability that at least one of n sidelobe slots succeeds.

    Up to spec.selection_direct_limit slots the inclusion-exclusion sum
    sum_k (-1)^(k+1) C(n, k) P^k is evaluated with compensated summation.
    Beyond it the binomial weights destroy double precision and the
    complementary Monte Carlo estimator is used instead.

    Raises:
        PrecisionLossError: If the alternating sum's error bound exceeds tolerance.
    """
    spec = spec or QuadratureSpec()
    if n == 0:
        return SelectionValue(0.0, 0.0, False)

    if n > spec.selection_direct_limit:
        if sample is None:
            sample = SidelobeTierSample(params, spec.selection_samples, spec.selection_seed)
        value, error = sample.selection(n, r, spec)
        return SelectionValue(min(max(value, 0.0), 1.0), error, True)

    inner = QuadratureSpec(
        abs_tol=min(spec.abs_tol, 1e-14),
        rel_tol=min(spec.rel_tol, 1e-11),
        truncation_cut=spec.truncation_cut,
        max_subdivisions=spec.max_subdivisions,
        max_panels=spec.max_panels,
    )
    probabilities, errors = joint_sidelobe_profile(n, r, params, inner)
    ks = np.arange(1, n + 1)
    weights = comb(n, ks, exact=False)
    signs = np.where(ks % 2 == 1, 1.0, -1.0)
    terms = signs * weights * probabilities
    value = math.fsum(terms.tolist())
    bound = float(np.sum(weights * errors)) + n * np.finfo(float).eps * float(np.sum(np.abs(terms)))
    if bound > CANCELLATION_TOLERANCE:
        raise PrecisionLossError(
            f"inclusion-exclusion over {n} slots at r={r:g} has error bound {bound:.3g} "
            f"above {CANCELLATION_TOLERANCE:g}"
        )
    if value < -bound or value > 1.0 + bound:
        raise QuadratureError(f"selection probability {value} outside [0, 1] beyond bound {bound:.3g}")
    return SelectionValue(min(max(value, 0.0), 1.0), bound, False)


def q_selection(n: int, r: float, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> float:
    """Probability that at least one of n sidelobe slots from a BS at distance r succeeds."""
    if n < 1:
        raise ValueError(f"slot count must be at least 1, got {n}")
    return selection_probability(n, r, params, spec).value


def p_success_sidelobe(n: int, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> AnalyticResult:
    """
    Probability of detecting some BS through its sidelobe within n slots.

    Integrates the selection probability over the BSs whose sidelobe
    faces the UE (density theta_UE * (2pi - theta_BS)/2pi * lambda, LOS
    with probability exp(-beta r)).

    Args:
        n: Sidelobe slots per BS.
        params: System parameters.
        spec: Quadrature settings.

    Returns:
        AnalyticResult; 0 when epsilon = 0, n = 0 or a single full-circle beam.
    """
    spec = spec or QuadratureSpec()
    if n < 0:
        raise ValueError(f"slot count must be nonnegative, got {n}")
    if params.epsilon == 0 or n == 0 or params.n_bs == 1:
        return AnalyticResult(0.0, 0.0, 0)

    density = (params.theta_ue * (2.0 * math.pi - params.theta_bs) / (2.0 * math.pi)
               * params.lambda_bs)
    sample = None
    if n > spec.selection_direct_limit:
        sample = SidelobeTierSample(params, spec.selection_samples, spec.selection_seed)
    beta = params.beta
    selection_error = 0.0
    backed = sample is not None

    def integrand(r):
        nonlocal selection_error
        if r <= 0:
            return 0.0
        selection = selection_probability(n, r, params, spec, sample)
        weight = math.exp(-beta * r) * r
        selection_error = max(selection_error, selection.error)
        return selection.value * weight

    noise = _sidelobe_noise(params)
    noise_length = (params.epsilon / (params.sinr_threshold * noise)) ** (1.0 / params.alpha_los)
    scale = min(noise_length, 1.0 / beta) if beta > 0 else noise_length
    result = integrate_semi_infinite(integrand, scale, spec)
    value = density * result.value
    error = density * result.error
    if backed:
        # largest pointwise standard error times the radial weight integral
        error += density * selection_error * (1.0 / beta ** 2 if beta > 0 else scale ** 2)
    logger.debug("P_ss(n=%d) = %.6g +/- %.2g (%d evaluations)", n, value, error, result.evaluations)
    if value > 1.0 + error:
        logger.warning("sidelobe union bound exceeds 1 (%.4g); clamping", value)
    return AnalyticResult(min(max(value, 0.0), 1.0), error, result.evaluations, backed)
