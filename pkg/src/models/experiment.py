"""
Experiment data models.

This module defines the cell-search scheme configuration and the fully
resolved experiment specification built from a configuration file or a
preset.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from models.system import FrameTiming, SystemParams

PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "custom")
ENGINES = ("analytic", "monte_carlo")
ANALYTIC_MODELS = ("los", "nlos", "sidelobe")
RATE_CONVENTIONS = ("mean_rate", "mean_latency")


class Scheme(str, Enum):
    """Cell-search scheme."""
    RANDOM = "rb"
    EXHAUSTIVE = "es"
    ITERATIVE = "is"


class AntennaKind(str, Enum):
    """Antenna model used by the simulator."""
    SECTOR = "sbp"
    ULA = "ula"


DEFAULT_SS_BLOCKS = {Scheme.RANDOM: 16, Scheme.EXHAUSTIVE: 64, Scheme.ITERATIVE: 32}


@dataclass(frozen=True)
class SchemeConfig:
    """
    Cell-search scheme settings.

    budget is the number of mini-slots the UE may listen; None means one
    full sweep of the scheme (params.n_c for random beamforming).
    """
    scheme: Scheme = Scheme.RANDOM
    antenna_model: AntennaKind = AntennaKind.SECTOR
    n_ss_blocks: Optional[int] = None
    stage1_beamwidth: float = math.pi / 2
    stage1_active_elements: int = 2
    budget: Optional[int] = None
    nlos_enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "antenna_model", AntennaKind(self.antenna_model))
        if self.n_ss_blocks is None:
            object.__setattr__(self, "n_ss_blocks", DEFAULT_SS_BLOCKS[self.scheme])
        if not 0 < self.stage1_beamwidth <= 2.0 * math.pi:
            raise ValueError(f"stage1_beamwidth must lie in (0, 2pi], got {self.stage1_beamwidth}")
        if self.stage1_active_elements < 1:
            raise ValueError(f"stage1_active_elements must be positive, got {self.stage1_active_elements}")
        if self.budget is not None and self.budget < 0:
            raise ValueError(f"budget must be nonnegative, got {self.budget}")

    @property
    def stage1_beams(self) -> int:
        return max(1, round(2.0 * math.pi / self.stage1_beamwidth))

    def sweep_slots(self, params: SystemParams) -> int:
        """Slots in one full sweep of the scheme."""
        if self.scheme is Scheme.RANDOM:
            return params.n_bs
        if self.scheme is Scheme.EXHAUSTIVE:
            return params.n_bs * params.n_ue
        return self.stage1_beams * params.n_ue + params.n_bs

    def slot_budget(self, params: SystemParams) -> int:
        if self.budget is not None:
            return self.budget
        if self.scheme is Scheme.RANDOM:
            return params.n_c
        return self.sweep_slots(params)

    def frame(self) -> FrameTiming:
        return FrameTiming.for_ss_blocks(self.n_ss_blocks)

    @property
    def label(self) -> str:
        return self.scheme.value


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment."""
    preset: str = "custom"
    sweep_parameter: str = "lambda_bs"
    sweep_values: tuple[float, ...] = ()
    engines: tuple[str, ...] = ENGINES
    trials: int = 10000
    seed: int = 1
    output_path: str = "results.csv"
    schemes: tuple[Scheme, ...] = (Scheme.RANDOM,)
    antenna: AntennaKind = AntennaKind.SECTOR
    models: tuple[str, ...] = ("los",)
    metric: str = "p_f"
    rate_convention: str = "mean_rate"
    packet_bits: float = 1e6
    k_cycles: int = 1
    stage1_beamwidth: float = math.pi / 2
    stage1_active_elements: int = 2
    nlos_enabled: bool = False
    oversampling: int = 4
    params: SystemParams = field(default_factory=SystemParams)
    frame: FrameTiming = field(default_factory=FrameTiming)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"Unknown preset: {self.preset}")
        unknown = [e for e in self.engines if e not in ENGINES]
        if unknown or not self.engines:
            raise ValueError(f"engines must be a nonempty subset of {ENGINES}, got {self.engines}")
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")
        if self.sweep_parameter not in SystemParams.field_names() + ["packet_bits"]:
            raise ValueError(f"Unknown sweep parameter: {self.sweep_parameter}")
        bad_models = [m for m in self.models if m not in ANALYTIC_MODELS]
        if bad_models:
            raise ValueError(f"Unknown analytic model: {bad_models[0]}")
        if self.metric not in ("p_f", "e_ia_ms", "e_total_ms"):
            raise ValueError(f"Unknown metric: {self.metric}")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ValueError(f"Unknown rate convention: {self.rate_convention}")
        if self.packet_bits <= 0:
            raise ValueError(f"packet_bits must be positive, got {self.packet_bits}")
        for name in ("k_cycles", "oversampling"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        object.__setattr__(self, "antenna", AntennaKind(self.antenna))
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))

    def scheme_config(self, scheme: Scheme, budget: Optional[int] = None) -> SchemeConfig:
        """Scheme settings for one scheme of this experiment."""
        return SchemeConfig(
            scheme=scheme,
            antenna_model=self.antenna,
            stage1_beamwidth=self.stage1_beamwidth,
            stage1_active_elements=self.stage1_active_elements,
            budget=budget,
            nlos_enabled=self.nlos_enabled,
        )
