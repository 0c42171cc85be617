"""
Beamforming service.

This module provides sectorized pattern gains, ULA steering vectors,
codebooks and beamformed gains of single-path channels.

Available methods:
- sbp_gain(pattern, angle_offset): Gain of a sectorized pattern.
- ula_response(k, theta): ULA array response vector.
- beam_vector(k, K, theta): Zero-padded beam with k active elements.
- make_codebook(K, n_beams, k_active): ULA codebook with uniformly spaced boresights.
- make_sector_codebook(n_beams, epsilon, beamwidth): Sector codebook.
- steering_matrix(k, angles): Array responses stacked as rows.
- codebook_response(codebook, angles): |a(theta)^H v|^2 for every angle and beam.
- effective_gain(w, channel, v): Beamformed gain of a single-path channel.
- refine_beams(channel, bs_codebook, ue_codebook): Best beam pair of two codebooks.
"""
import logging

import numpy as np

from models.antenna import BeamVector, Codebook, PathChannel, RefinedBeams, SectorPattern
from utils.units import wrap_angle

logger = logging.getLogger(__name__)


def sbp_gain(pattern: SectorPattern, angle_offset):
    """
    Gain of a sectorized pattern.

    Args:
        pattern: Sector pattern.
        angle_offset: Offset from boresight in rad (scalar or array).

    Returns:
        Mainlobe gain where |offset| <= beamwidth/2, epsilon elsewhere.
    """
    offset = np.abs(wrap_angle(angle_offset))
    half_width = pattern.beamwidth / 2.0
    gain = np.where(offset <= half_width + 1e-12, pattern.mainlobe_gain, pattern.epsilon)
    if gain.ndim == 0:
        return float(gain)
    return gain


def ula_response(k: int, theta: float) -> np.ndarray:
    """
    ULA response with half-wavelength spacing.

    Entry m is exp(-j m pi sin(theta)) / sqrt(k).
    """
    if k < 1:
        raise ValueError(f"array size must be positive, got {k}")
    m = np.arange(k)
    return np.exp(-1j * m * np.pi * np.sin(theta)) / np.sqrt(k)


def steering_matrix(k: int, angles) -> np.ndarray:
    """ULA responses for each angle, one row per angle."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    m = np.arange(k)
    return np.exp(-1j * np.pi * np.outer(np.sin(angles), m)) / np.sqrt(k)


def beam_vector(k: int, K: int, theta: float) -> BeamVector:
    """
    Beam with k active elements of a K-element array.

    The first k entries steer towards theta; the rest are zero, so smaller
    k gives a wider beam.

    Raises:
        ValueError: If k is not in [1, K].
    """
    if not 0 < k <= K:
        raise ValueError(f"active elements must satisfy 0 < k <= K, got k={k}, K={K}")
    coefficients = np.zeros(K, dtype=complex)
    coefficients[:k] = ula_response(k, theta)
    return BeamVector(coefficients=coefficients, active_elements=k, boresight=float(theta))


def make_codebook(K: int, n_beams: int, k_active: int | None = None) -> Codebook:
    """
    ULA codebook with boresights uniformly spaced over [0, 2pi).

    Args:
        K: Array size.
        n_beams: Number of beams.
        k_active: Active elements per beam (defaults to K).

    Returns:
        Codebook of n_beams beam vectors.
    """
    if n_beams < 1:
        raise ValueError(f"n_beams must be positive, got {n_beams}")
    k = K if k_active is None else k_active
    boresights = 2.0 * np.pi * np.arange(n_beams) / n_beams
    beams = tuple(beam_vector(k, K, theta) for theta in boresights)
    return Codebook(boresights=boresights, beams=beams)


def make_sector_codebook(n_beams: int, epsilon: float = 0.0, beamwidth: float | None = None) -> Codebook:
    """Sector codebook; beamwidth defaults to 2pi / n_beams."""
    if n_beams < 1:
        raise ValueError(f"n_beams must be positive, got {n_beams}")
    width = 2.0 * np.pi / n_beams if beamwidth is None else beamwidth
    boresights = 2.0 * np.pi * np.arange(n_beams) / n_beams
    return Codebook(boresights=boresights, pattern=SectorPattern(width, epsilon))


def codebook_response(codebook: Codebook, angles) -> np.ndarray:
    """
    Normalized beam response for each (angle, beam).

    For a ULA codebook this is |a(K, angle)^H v|^2, at most 1. For a sector
    codebook it is the pattern gain.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if codebook.is_sector:
        offsets = angles[:, None] - codebook.boresights[None, :]
        return sbp_gain(codebook.pattern, offsets)
    K = codebook.beams[0].size
    response = steering_matrix(K, angles).conj() @ codebook.matrix
    return np.abs(response) ** 2


def effective_gain(w: BeamVector, channel: PathChannel, v: BeamVector) -> float:
    """
    |w^H H v|^2 for a single-path channel.

    Uses the rank-one form l * |h|^2 * |w^H a_ue|^2 * |a_bs^H v|^2; the
    channel matrix is never built.

    Raises:
        ValueError: If beam sizes do not match the channel's arrays.
    """
    if w.size != channel.m_ue or v.size != channel.m_bs:
        raise ValueError(
            f"beam sizes ({w.size}, {v.size}) do not match arrays ({channel.m_ue}, {channel.m_bs})"
        )
    ue_term = np.abs(np.vdot(w.coefficients, ula_response(channel.m_ue, channel.aoa))) ** 2
    bs_term = np.abs(np.vdot(ula_response(channel.m_bs, channel.aod), v.coefficients)) ** 2
    return float(channel.path_gain * channel.fading * ue_term * bs_term)


def refine_beams(channel: PathChannel, bs_codebook: Codebook, ue_codebook: Codebook) -> RefinedBeams:
    """
    Beam pair maximizing |w^H H v|^2 over two codebooks.

    For a rank-one channel the product search separates into one search
    over BS beams and one over UE beams. Ties go to the lowest index.

    Raises:
        ValueError: If a codebook is empty or is a sector codebook.
    """
    if len(bs_codebook) == 0 or len(ue_codebook) == 0:
        raise ValueError("codebooks must be nonempty")
    if bs_codebook.is_sector or ue_codebook.is_sector:
        raise ValueError("refinement needs beam-vector codebooks")
    bs_scores = codebook_response(bs_codebook, channel.aod)[0]
    ue_scores = codebook_response(ue_codebook, channel.aoa)[0]
    v = bs_codebook.beams[int(np.argmax(bs_scores))]
    w = ue_codebook.beams[int(np.argmax(ue_scores))]
    return RefinedBeams(bs_beam=v, ue_beam=w, gain=effective_gain(w, channel, v))
