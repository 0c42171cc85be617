"""
Result data models.

This module defines numerical settings and the records produced by the
analytic engine, the simulator, the latency model and experiment runs.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, TypedDict

from models.system import FrameTiming


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Settings for semi-infinite quadrature.

    truncation_cut is relative: panels are appended until the newest one
    contributes less than truncation_cut times the running total.
    """
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    truncation_cut: float = 1e-14
    max_subdivisions: int = 200
    max_panels: int = 40
    selection_direct_limit: int = 20
    selection_samples: int = 20000
    selection_seed: int = 0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.truncation_cut <= 0:
            raise ValueError(f"quadrature tolerances must be positive: {self}")
        if self.max_subdivisions < 1 or self.max_panels < 1:
            raise ValueError(f"quadrature limits must be positive: {self}")

    def tightened(self) -> "QuadratureSpec":
        """Spec for nested integrals, one order tighter."""
        return replace(self, abs_tol=self.abs_tol / 10.0, rel_tol=self.rel_tol / 10.0)


@dataclass(frozen=True)
class AnalyticResult:
    """Value of a closed-form expression with its numerical error estimate."""
    value: float
    error_estimate: float
    evaluations: int
    estimator_backed: bool = False


@dataclass(frozen=True)
class DetectionOutcome:
    """Result of one cell-search trial."""
    success: bool
    winning_slot: Optional[int]
    winning_bs: Optional[int]
    best_sinr: float


@dataclass(frozen=True)
class LatencyReport:
    """Expected latencies in ms and the inputs they were computed from."""
    p_f: float
    e_ia_ms: float
    frame: FrameTiming
    e_total_ms: Optional[float] = None
    rate_bps: Optional[float] = None
    packet_bits: Optional[float] = None


@dataclass(frozen=True)
class BeamwidthScan:
    """Outcome of the beam-count scan."""
    feasible: bool
    n_bs: Optional[int]
    e_ia_ms: Optional[float]
    min_failure: float
    min_failure_n_bs: int
    grid: tuple[tuple[int, LatencyReport], ...] = field(default=())


@dataclass(frozen=True)
class CalibrationResult:
    """Fitted sidelobe gain."""
    epsilon: float
    residual_rms: float
    status: str
    diagnostics: tuple[tuple[float, float, float], ...] = ()


class ResultRow(TypedDict):
    """One CSV row."""
    sweep_parameter: str
    sweep_value: float
    series: str
    scheme: str
    antenna: str
    model: str
    engine: str
    metric: str
    estimate: float
    uncertainty: float
    samples: int
    seed: int
    wall_time_s: float
    error: str


class RunMetadata(TypedDict):
    """Metadata sidecar written next to each CSV."""
    preset: str
    started_at: str
    finished_at: str
    parameters: dict
    frames: dict
    epsilon_source: str
    sidelobe_epsilon: float
    rate_convention: str
    trials: int
    seed: int
    rows: int
    failed_rows: int
    optima: dict
    versions: dict
