"""
Antenna data models.

This module defines the sectorized beam pattern, ULA beam vectors,
codebooks and the single-path channel they act on.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


@dataclass(frozen=True)
class SectorPattern:
    """
    Sectorized beam pattern.

    Constant gain inside the mainlobe, epsilon elsewhere. The mainlobe gain
    follows from conserving total power over the circle.
    """
    beamwidth: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 < self.beamwidth <= 2.0 * math.pi + 1e-12:
            raise ValueError(f"beamwidth must lie in (0, 2pi], got {self.beamwidth}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def mainlobe_gain(self) -> float:
        theta = self.beamwidth
        return (2.0 * math.pi - (2.0 * math.pi - theta) * self.epsilon) / theta


@dataclass(frozen=True, eq=False)
class BeamVector:
    """Unit-norm beamforming vector with k active elements out of K."""
    coefficients: np.ndarray
    active_elements: int
    boresight: float

    @property
    def size(self) -> int:
        return int(self.coefficients.shape[0])


@dataclass(frozen=True, eq=False)
class Codebook:
    """
    Beam codebook.

    ULA codebooks carry beam vectors; sector codebooks carry a pattern and
    only the boresights.
    """
    boresights: np.ndarray
    beams: tuple[BeamVector, ...] = ()
    pattern: Optional[SectorPattern] = None

    def __len__(self) -> int:
        return int(self.boresights.shape[0])

    @property
    def is_sector(self) -> bool:
        return self.pattern is not None

    @property
    def matrix(self) -> np.ndarray:
        """Beam vectors stacked as columns (elements x beams)."""
        if self.is_sector:
            raise ValueError("sector codebooks have no beam vectors")
        return np.stack([beam.coefficients for beam in self.beams], axis=1)


@dataclass(frozen=True)
class PathChannel:
    """
    Single-path channel between a BS array and a UE array.

    Stored in rank-one form: H = sqrt(path_gain) * h * a_ue(aoa) a_bs(aod)^H.
    """
    path_gain: float
    fading: float
    aoa: float
    aod: float
    m_ue: int
    m_bs: int


class RefinedBeams(NamedTuple):
    """Result of the data-plane beam search."""
    bs_beam: BeamVector
    ue_beam: BeamVector
    gain: float
