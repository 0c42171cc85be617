"""
Analytic service.

This module evaluates the closed-form detection probabilities of random
beamforming by semi-infinite quadrature: the LOS-only model, the model
with NLOS links, and the two-tier model with BS sidelobes.

Available methods:
- laplace_los(s, params, spec): Laplace transform of aligned LOS interference.
- p_success_los(params, spec): Single-slot detection probability, LOS only.
- failure_prob_los(params, n_c, spec): Detection failure over n_c slots, LOS only.
- laplace_nlos(s, params, spec): Laplace transform of interference with NLOS links.
- p_success_nlos(params, spec): Single-slot detection probability with NLOS links.
- failure_prob_nlos(params, n_c, spec): Detection failure with NLOS links.
- laplace_two_tier(s, params, spec): Laplace transform with mainlobe and sidelobe tiers.
- p_success_mainlobe(params, spec): Single-slot mainlobe detection probability.
- failure_prob_sidelobe(params, n_c, spec): Detection failure with sidelobes.
- evaluate_failure(model, params, n_c, spec): Failure probability with error estimate.
- analytic_failure(params, n_c): Failure probability of the model that fits params.

Each model reads only the parameters of its own regime: the LOS model
ignores epsilon and alpha_nlos, the NLOS model ignores epsilon and the
sidelobe model ignores alpha_nlos.
"""
import logging
import math
from typing import Optional

from models.errors import QuadratureError
from models.results import AnalyticResult, QuadratureSpec
from models.system import SystemParams
from services import sidelobe_service
from services.network_service import noise_power_normalized
from utils.quadrature import expit_ratio, integrate_semi_infinite, panel_scale

logger = logging.getLogger(__name__)

MODELS = ("los", "nlos", "sidelobe")


def _checked_probability(value: float, error: float, name: str) -> float:
    """
    Clip a union-bound probability to [0, 1].

    Values below zero beyond the error estimate are numerical failures.
    Values above one are a property of the union bound and are clamped.
    """
    if value < -error:
        raise QuadratureError(f"{name} = {value} is negative beyond its error estimate {error:.3g}")
    if value > 1.0 + error:
        logger.warning("%s union bound exceeds 1 (%.6g); clamping", name, value)
    return min(max(value, 0.0), 1.0)


def _aligned_density(params: SystemParams) -> float:
    """Density of BSs whose mainlobe and the UE's mainlobe face each other, times 2pi."""
    return 2.0 * math.pi * params.lambda_bs / (params.n_bs * params.n_ue)


def _check_convergent(alpha: float, beta: float):
    if beta == 0 and alpha <= 2:
        raise ValueError(f"interference integral diverges for beta = 0 and alpha = {alpha}")


def _los_exponent(log_s: float, density: float, params: SystemParams, spec: QuadratureSpec):
    alpha, beta = params.alpha_los, params.beta

    def integrand(v):
        return expit_ratio(log_s, alpha, v) * math.exp(-beta * v) * v

    result = integrate_semi_infinite(integrand, panel_scale(log_s, alpha, beta), spec)
    return density * result.value, density * result.error, result.evaluations


def laplace_los(s: float, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Laplace transform of the aligned LOS interference, normalized path loss.

    exp(-2pi lambda/(N_BS N_UE) * int_0^inf s e^{-beta v} v / (v^alpha + s) dv)

    Args:
        s: Transform argument (T r^alpha at serving distance r).
        params: System parameters.
        spec: Quadrature settings.

    Returns:
        Value in (0, 1], nonincreasing in s.

    Raises:
        ValueError: If s < 0 or the integral diverges (beta = 0, alpha <= 2).
    """
    if s < 0:
        raise ValueError(f"Laplace argument must be nonnegative, got {s}")
    _check_convergent(params.alpha_los, params.beta)
    if s == 0:
        return 1.0
    exponent, _, _ = _los_exponent(math.log(s), _aligned_density(params), params, spec or QuadratureSpec())
    return math.exp(-exponent)


def p_success_los(params: SystemParams, spec: Optional[QuadratureSpec] = None) -> AnalyticResult:
    """
    Single-slot detection probability with LOS links only and no sidelobes.

    P_s = 2pi lambda/(N_BS N_UE) * int e^{-T r^a sigma^2} L(T r^a) e^{-beta r} r dr

    Args:
        params: System parameters.
        spec: Quadrature settings; nested integrals use one order tighter.

    Returns:
        AnalyticResult with P_s.
    """
    spec = spec or QuadratureSpec()
    inner = spec.tightened()
    _check_convergent(params.alpha_los, params.beta)
    density = _aligned_density(params)
    alpha, beta, threshold = params.alpha_los, params.beta, params.sinr_threshold
    sigma2 = noise_power_normalized(params, "control", params.include_bs_gain, normalized=True)
    inner_evaluations = 0
    inner_error = 0.0

    def integrand(r):
        nonlocal inner_evaluations, inner_error
        if r <= 0:
            return 0.0
        log_s = math.log(threshold) + alpha * math.log(r)
        exponent, exponent_error, evaluations = _los_exponent(log_s, density, params, inner)
        inner_evaluations += evaluations
        inner_error = max(inner_error, exponent_error)
        return math.exp(-math.exp(log_s) * sigma2 - exponent - beta * r) * r

    noise_length = (1.0 / (threshold * sigma2)) ** (1.0 / alpha)
    scale = min(noise_length, 1.0 / beta) if beta > 0 else noise_length
    result = integrate_semi_infinite(integrand, scale, spec)
    value = density * result.value
    # an inner exponent off by d scales the integrand by at most e^d
    error = density * result.error + value * math.expm1(inner_error)
    return AnalyticResult(
        _checked_probability(value, error, "P_s"), error, result.evaluations + inner_evaluations
    )


def _failure_from_success(success: AnalyticResult, n_c: int) -> AnalyticResult:
    if n_c == 0:
        return AnalyticResult(1.0, 0.0, success.evaluations, success.estimator_backed)
    miss = 1.0 - success.value
    value = miss ** n_c
    error = n_c * miss ** (n_c - 1) * success.error_estimate
    return AnalyticResult(value, error, success.evaluations, success.estimator_backed)


def failure_prob_los(params: SystemParams, n_c: Optional[int] = None,
                     spec: Optional[QuadratureSpec] = None) -> float:
    """Detection failure (1 - P_s)^n_c of the LOS-only model (n_c defaults to params.n_c)."""
    return evaluate_failure("los", params, n_c, spec).value


def laplace_nlos(s: float, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Laplace transform of the aligned interference with LOS and NLOS links.

    Interferers keep the unnormalized path loss: k1 = (c/4pi f_c)^alpha_L
    for LOS and k2 = (c/4pi f_c)^alpha_N for NLOS links.

    Raises:
        ValueError: If alpha_nlos is infinite, s < 0 or the integral diverges.
    """
    if s < 0:
        raise ValueError(f"Laplace argument must be nonnegative, got {s}")
    if s == 0:
        return 1.0
    _require_finite_nlos(params)
    exponent, _, _ = _nlos_exponent(math.log(s), _aligned_density(params), params, spec or QuadratureSpec())
    return math.exp(-exponent)


def _require_finite_nlos(params: SystemParams):
    if math.isinf(params.alpha_nlos):
        raise ValueError("NLOS analysis needs a finite alpha_nlos")
    if params.alpha_nlos <= 2:
        raise ValueError(f"NLOS interference diverges for alpha_nlos = {params.alpha_nlos}")
    _check_convergent(params.alpha_los, params.beta)


def _nlos_exponent(log_s: float, density: float, params: SystemParams, spec: QuadratureSpec):
    alpha_l, alpha_n, beta = params.alpha_los, params.alpha_nlos, params.beta
    log_k = math.log(params.wavelength_factor)
    log_los = log_s + alpha_l * log_k
    log_nlos = log_s + alpha_n * log_k

    def integrand(v):
        los = math.exp(-beta * v)
        return (los * expit_ratio(log_los, alpha_l, v)
                - math.expm1(-beta * v) * expit_ratio(log_nlos, alpha_n, v)) * v

    scale = max(panel_scale(log_los, alpha_l, beta), panel_scale(log_nlos, alpha_n, 0.0))
    result = integrate_semi_infinite(integrand, scale, spec)
    return density * result.value, density * result.error, result.evaluations


def p_success_nlos(params: SystemParams, spec: Optional[QuadratureSpec] = None) -> AnalyticResult:
    """
    Single-slot detection probability with LOS and NLOS links.

    P_s^N = 2pi lambda/(N_BS N_UE) * int (kappa_L + kappa_N) r dr, where the
    serving link is LOS (kappa_L) or NLOS (kappa_N) and the threshold
    argument is T C(r)^-alpha with C(r) = c / (4pi f_c r).
    """
    spec = spec or QuadratureSpec()
    inner = spec.tightened()
    _require_finite_nlos(params)
    density = _aligned_density(params)
    alpha_l, alpha_n, beta = params.alpha_los, params.alpha_nlos, params.beta
    sigma2 = noise_power_normalized(params, "control", params.include_bs_gain)
    log_threshold = math.log(params.sinr_threshold)
    log_k = math.log(params.wavelength_factor)
    inner_evaluations = 0
    inner_error = 0.0

    def kappa(log_s: float) -> float:
        nonlocal inner_evaluations, inner_error
        exponent, exponent_error, evaluations = _nlos_exponent(log_s, density, params, inner)
        inner_evaluations += evaluations
        inner_error = max(inner_error, exponent_error)
        return math.exp(-math.exp(log_s) * sigma2 - exponent)

    def integrand(r):
        if r <= 0:
            return 0.0
        log_r = math.log(r)
        los_part = kappa(log_threshold + alpha_l * (log_r - log_k)) * math.exp(-beta * r)
        nlos_weight = -math.expm1(-beta * r)
        nlos_part = 0.0
        if nlos_weight > 0:
            nlos_part = kappa(log_threshold + alpha_n * (log_r - log_k)) * nlos_weight
        return (los_part + nlos_part) * r

    noise_length = params.wavelength_factor * (1.0 / (params.sinr_threshold * sigma2)) ** (1.0 / alpha_l)
    scale = min(noise_length, 1.0 / beta) if beta > 0 else noise_length
    result = integrate_semi_infinite(integrand, scale, spec)
    value = density * result.value
    # an inner exponent off by d scales the integrand by at most e^d
    error = density * result.error + value * math.expm1(inner_error)
    return AnalyticResult(
        _checked_probability(value, error, "P_s^N"), error, result.evaluations + inner_evaluations
    )


def failure_prob_nlos(params: SystemParams, n_c: Optional[int] = None,
                      spec: Optional[QuadratureSpec] = None) -> float:
    """Detection failure (1 - P_s^N)^n_c with NLOS links."""
    return evaluate_failure("nlos", params, n_c, spec).value


def _tiers(params: SystemParams):
    """(density, BS gain) of the mainlobe and sidelobe tiers inside the UE beam."""
    share = params.theta_bs / (2.0 * math.pi)
    tiers = [(params.theta_ue * share * params.lambda_bs, params.mainlobe_gain_bs)]
    if params.epsilon > 0 and params.n_bs > 1:
        tiers.append((params.theta_ue * (1.0 - share) * params.lambda_bs, params.epsilon))
    return tiers


def _two_tier_exponent(log_s: float, params: SystemParams, spec: QuadratureSpec):
    total, error, evaluations = 0.0, 0.0, 0
    alpha, beta = params.alpha_los, params.beta
    for density, gain in _tiers(params):
        log_sg = log_s + math.log(gain)

        def integrand(v, log_sg=log_sg):
            return expit_ratio(log_sg, alpha, v) * math.exp(-beta * v) * v

        result = integrate_semi_infinite(integrand, panel_scale(log_sg, alpha, beta), spec)
        total += density * result.value
        error += density * result.error
        evaluations += result.evaluations
    return total, error, evaluations


def laplace_two_tier(s: float, params: SystemParams, spec: Optional[QuadratureSpec] = None) -> float:
    """
    Laplace transform of interference from the mainlobe and sidelobe tiers.

    Tier densities are theta_UE * theta_BS/2pi * lambda (gain G_main) and
    theta_UE * (2pi - theta_BS)/2pi * lambda (gain epsilon). The serving
    BS's gain is absorbed in s, so the detection probability evaluates it
    at s = T r^alpha / G_main.
    """
    if s < 0:
        raise ValueError(f"Laplace argument must be nonnegative, got {s}")
    _check_convergent(params.alpha_los, params.beta)
    if s == 0:
        return 1.0
    exponent, _, _ = _two_tier_exponent(math.log(s), params, spec or QuadratureSpec())
    return math.exp(-exponent)


def p_success_mainlobe(params: SystemParams, spec: Optional[QuadratureSpec] = None) -> AnalyticResult:
    """
    Single-slot probability of detecting a BS through its mainlobe when
    other BSs interfere through mainlobes and sidelobes.

    Reduces to p_success_los when epsilon = 0.
    """
    spec = spec or QuadratureSpec()
    inner = spec.tightened()
    _check_convergent(params.alpha_los, params.beta)
    alpha, beta, threshold = params.alpha_los, params.beta, params.sinr_threshold
    g_main = params.mainlobe_gain_bs
    density = params.theta_ue * params.theta_bs / (2.0 * math.pi) * params.lambda_bs
    sigma2 = noise_power_normalized(params, "control", params.include_bs_gain, normalized=True)
    log_gain = math.log(g_main)
    inner_evaluations = 0
    inner_error = 0.0

    def integrand(r):
        nonlocal inner_evaluations, inner_error
        if r <= 0:
            return 0.0
        log_tr = math.log(threshold) + alpha * math.log(r)
        exponent, exponent_error, evaluations = _two_tier_exponent(log_tr - log_gain, params, inner)
        inner_evaluations += evaluations
        inner_error = max(inner_error, exponent_error)
        return math.exp(-math.exp(log_tr) * sigma2 - exponent - beta * r) * r

    noise_length = (1.0 / (threshold * sigma2)) ** (1.0 / alpha)
    scale = min(noise_length, 1.0 / beta) if beta > 0 else noise_length
    result = integrate_semi_infinite(integrand, scale, spec)
    value = density * result.value
    # an inner exponent off by d scales the integrand by at most e^d
    error = density * result.error + value * math.expm1(inner_error)
    return AnalyticResult(
        _checked_probability(value, error, "P_sm"), error, result.evaluations + inner_evaluations
    )


def failure_prob_sidelobe(params: SystemParams, n_c: Optional[int] = None,
                          spec: Optional[QuadratureSpec] = None) -> float:
    """
    Detection failure with sidelobes, (1 - P_ss)(1 - P_sm)^n_c.

    The sidelobe term uses params.sidelobe_slots slots, n_c - 1 by default.
    """
    return evaluate_failure("sidelobe", params, n_c, spec).value


def evaluate_failure(model: str, params: SystemParams, n_c: Optional[int] = None,
                     spec: Optional[QuadratureSpec] = None) -> AnalyticResult:
    """
    Detection failure probability of an analytic model.

    Args:
        model: "los", "nlos" or "sidelobe".
        params: System parameters.
        n_c: Slot budget (defaults to params.n_c).
        spec: Quadrature settings.

    Returns:
        AnalyticResult with the failure probability and its propagated error.

    Raises:
        ValueError: If the model is unknown or n_c is negative.
    """
    n_c = params.n_c if n_c is None else n_c
    if n_c < 0:
        raise ValueError(f"n_c must be nonnegative, got {n_c}")
    if model == "los":
        return _failure_from_success(p_success_los(params, spec), n_c)
    if model == "nlos":
        return _failure_from_success(p_success_nlos(params, spec), n_c)
    if model != "sidelobe":
        raise ValueError(f"Unknown analytic model: {model}")

    mainlobe = _failure_from_success(p_success_mainlobe(params, spec), n_c)
    if n_c == 0:
        return mainlobe
    slots = params.sidelobe_slots if params.sidelobe_slots is not None else n_c - 1
    sidelobe = sidelobe_service.p_success_sidelobe(slots, params, spec)
    miss = 1.0 - sidelobe.value
    value = miss * mainlobe.value
    error = miss * mainlobe.error_estimate + mainlobe.value * sidelobe.error_estimate
    logger.debug("P_f^S(n_c=%d) = %.6g (P_ss = %.6g)", n_c, value, sidelobe.value)
    return AnalyticResult(value, error, mainlobe.evaluations + sidelobe.evaluations,
                          sidelobe.estimator_backed)


def analytic_failure(params: SystemParams, n_c: int) -> float:
    """Failure probability of the sidelobe model when epsilon > 0, else the LOS model."""
    model = "sidelobe" if params.epsilon > 0 else "los"
    return evaluate_failure(model, params, n_c).value
