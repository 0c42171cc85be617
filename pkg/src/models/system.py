"""
System data models.

This module defines the physical and protocol parameters of the network,
the frame timing of the cell-search procedure and the sampled network
realizations consumed by the simulator.

Available classes:
- SystemParams: Physical/protocol constants (defaults follow the reference table).
- FrameTiming: Frame, cell-search burst and random-access durations in ms.
- NetworkRealization: One sampled topology with per-slot blockage, fading and beams.
- LinkBudget: Path gain, antenna gains and normalized noise of one link.
"""
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from utils.units import SPEED_OF_LIGHT

T_SS_BLOCK_MS = 1.25 / 16


@dataclass(frozen=True)
class SystemParams:
    """
    Physical and protocol parameters.

    Densities are per square meter, distances in meters, powers in watts
    and the SINR threshold is linear.
    """
    lambda_bs: float = 1e-4
    beta: float = 0.02
    alpha_los: float = 2.5
    alpha_nlos: float = math.inf
    f_c: float = 28e9
    p_bs_control: float = 1.0
    p_bs_data: float = 1.0
    bw_control: float = 28.8e6
    bw_data: float = 100e6
    noise_figure_db: float = 7.0
    sinr_threshold: float = 1.0
    n_bs: int = 12
    n_ue: int = 4
    m_bs: int = 12
    m_ue: int = 4
    epsilon: float = 0.0
    n_c: int = 12
    region_radius: float = 2000.0
    include_bs_gain: bool = True
    sidelobe_slots: Optional[int] = None
    frozen_blockage: bool = False
    frozen_fading: bool = False
    max_expected_bs: float = 2e5

    def __post_init__(self):
        if not self.lambda_bs > 0:
            raise ValueError(f"lambda_bs must be positive, got {self.lambda_bs}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not 2.0 <= self.alpha_los <= self.alpha_nlos:
            raise ValueError(
                f"alpha_los/alpha_nlos must satisfy 2 <= alpha_los <= alpha_nlos, "
                f"got {self.alpha_los}/{self.alpha_nlos}"
            )
        for name in ("f_c", "p_bs_control", "p_bs_data", "bw_control", "bw_data",
                     "sinr_threshold", "region_radius", "max_expected_bs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("n_bs", "n_ue", "m_bs", "m_ue", "n_c"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.epsilon >= self.mainlobe_gain_bs:
            raise ValueError(
                f"epsilon must be below the mainlobe gain {self.mainlobe_gain_bs}, got {self.epsilon}"
            )
        if self.sidelobe_slots is not None and self.sidelobe_slots < 0:
            raise ValueError(f"sidelobe_slots must be nonnegative, got {self.sidelobe_slots}")

    @property
    def theta_bs(self) -> float:
        """BS beamwidth in rad."""
        return 2.0 * math.pi / self.n_bs

    @property
    def theta_ue(self) -> float:
        """UE beamwidth in rad."""
        return 2.0 * math.pi / self.n_ue

    @property
    def mainlobe_gain_bs(self) -> float:
        """BS mainlobe gain of the sectorized pattern."""
        theta = self.theta_bs
        return (2.0 * math.pi - (2.0 * math.pi - theta) * self.epsilon) / theta

    @property
    def mainlobe_gain_ue(self) -> float:
        """UE mainlobe gain; the UE pattern has no sidelobe."""
        return float(self.n_ue)

    @property
    def wavelength_factor(self) -> float:
        """c / (4 pi f_c)."""
        return SPEED_OF_LIGHT / (4.0 * math.pi * self.f_c)

    @property
    def sidelobe_slot_count(self) -> int:
        """Slots in which a BS reaches the UE with its sidelobe (n_c - 1 unless set)."""
        if self.sidelobe_slots is not None:
            return self.sidelobe_slots
        return self.n_c - 1

    @property
    def expected_bs_count(self) -> float:
        return self.lambda_bs * math.pi * self.region_radius ** 2

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class FrameTiming:
    """Frame timing in ms."""
    t_frame: float = 20.0
    t_cs: float = 1.25
    t_ra: float = 1.25
    n_ss_blocks: int = 16

    def __post_init__(self):
        if self.t_frame <= 0 or self.t_cs <= 0 or self.t_ra < 0:
            raise ValueError(f"frame durations must be positive: {self}")
        if self.n_ss_blocks < 1:
            raise ValueError(f"n_ss_blocks must be positive, got {self.n_ss_blocks}")
        if not self.t_cs + self.t_ra < self.t_frame:
            raise ValueError(
                f"t_cs + t_ra must be shorter than t_frame ({self.t_cs} + {self.t_ra} >= {self.t_frame})"
            )

    @property
    def t_ss_block(self) -> float:
        return self.t_cs / self.n_ss_blocks

    @property
    def access_overhead(self) -> float:
        """Cell-search plus random-access time per frame."""
        return self.t_cs + self.t_ra

    @property
    def data_window(self) -> float:
        return self.t_frame - self.t_cs - self.t_ra

    @classmethod
    def for_ss_blocks(cls, n_ss_blocks: int, t_frame: float = 20.0, t_ra: float = 1.25) -> "FrameTiming":
        """
        Frame whose burst carries n_ss_blocks blocks of 1.25/16 ms.

        16, 32 and 64 blocks give bursts of 1.25, 2.5 and 5 ms.
        """
        return cls(t_frame=t_frame, t_cs=n_ss_blocks * T_SS_BLOCK_MS, t_ra=t_ra,
                   n_ss_blocks=n_ss_blocks)

    @classmethod
    def adapted(cls, n_bs: int, t_frame: float = 20.0) -> "FrameTiming":
        """Frame whose burst and random-access window both scale with the beam count."""
        duration = n_bs * T_SS_BLOCK_MS
        return cls(t_frame=t_frame, t_cs=duration, t_ra=duration, n_ss_blocks=n_bs)


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    """
    One sampled network seen from a UE at the origin.

    Arrays are indexed [bs] or [bs, slot]; ue_boresight is indexed by scan
    cycle. The realization is never modified after sampling.
    """
    radius: np.ndarray
    azimuth: np.ndarray
    los_flags: np.ndarray
    fading: np.ndarray
    bs_boresight: np.ndarray
    ue_boresight: np.ndarray
    seed: int
    cycle_length: int = field(default=1)

    @property
    def n_bs_points(self) -> int:
        return int(self.radius.shape[0])

    @property
    def n_slots(self) -> int:
        return int(self.los_flags.shape[1])

    @property
    def positions(self) -> list[tuple[float, float]]:
        """BS polar coordinates (r, psi)."""
        return list(zip(self.radius.tolist(), self.azimuth.tolist()))

    @property
    def aod(self) -> np.ndarray:
        """Departure angle from each BS towards the UE."""
        return np.mod(self.azimuth + np.pi, 2.0 * np.pi)

    def ue_beam_at(self, slot: int) -> int:
        return int(self.ue_boresight[slot // self.cycle_length])


@dataclass(frozen=True)
class LinkBudget:
    """Link budget of one BS-UE link (linear units)."""
    path_gain: float
    antenna_gain_bs: float
    antenna_gain_ue: float
    noise_norm: float
