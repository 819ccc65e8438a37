# src/models/report_models.py
"""Models for bound verdicts, diagnostics, oracle results and acceptance rows."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class BoundDirection(str, Enum):
    LOWER_BOUND = "lower_bound"
    UPPER_BOUND = "upper_bound"
    INCONCLUSIVE = "inconclusive"


class BoundBasis(str, Enum):
    GLOBAL_MINIMA_CHAIN = "global_minima_chain"
    LOCAL_CHAIN = "local_chain"
    MAXIMA_CHAIN = "maxima_chain"


class BoundVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    direction: BoundDirection
    monotone: bool
    basis: BoundBasis
    caveats: List[str] = []
    orders: List[int] = []
    s_values: List[float] = []
    reason: Optional[str] = None


class CNSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    orders: List[int]
    values: List[float]
    recursion_residuals: List[float]
    strictly_decreasing: bool
    K_fit: Optional[float] = None


class IdentityCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    N: int
    residual: float
    tolerance: float
    passed: bool


class DeltaSComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    measured: float
    from_ratio: float
    from_asymptotics: Optional[float] = None
    sign_consistent: bool


class OpenProblemEvidence(BaseModel):
    """Observed evidence only; none of these fields is an assertion."""
    model_config = ConfigDict(frozen=True)

    cn_approaching_one: Optional[bool] = None
    last_cn: Optional[float] = None
    bound_status: str
    max_curvature_ratio: Optional[float] = None


class DiagnosticsReport(BaseModel):
    cn: CNSequence
    delta_S: List[DeltaSComparison]
    alpha: Optional[float] = None
    alpha_error: Optional[float] = None
    alpha_by_order: Dict[int, float] = {}
    terms_by_order: Dict[int, List[float]] = {}
    identity_checks: List[IdentityCheck] = []
    slope_profile: Dict[int, List[float]] = {}
    lambda_grid: List[float] = []
    magic_sign_matches: Optional[bool] = None
    open_problems: Optional[OpenProblemEvidence] = None
    partial: bool = False
    notes: List[str] = []


class SlopeCheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    p: float
    origin_value_residual: float
    origin_slope: float
    expected_origin_slope: float
    slope_sign_constant: bool
    sign_changes: List[float] = []


class ExactModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    borel_function: str
    closed_form: bool
    borel_summable: bool = True
    pole: Optional[float] = None


class PVSplit(BaseModel):
    model_config = ConfigDict(frozen=True)

    lam: float
    s_pert: float
    s_np: float
    s_exact: float

    @property
    def identity_residual(self) -> float:
        return abs(self.s_pert - self.s_np - self.s_exact)


class ZeroSlopeResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_star: float
    omega: float


class AcceptanceMode(str, Enum):
    ABS = "abs"
    REL = "rel"
    UPPER_BOUND = "upper_bound"
    EQUALS = "equals"


class AcceptanceRow(BaseModel):
    section: str
    key: str
    expected: float
    tolerance: float = Field(0.0, ge=0)
    mode: AcceptanceMode = AcceptanceMode.ABS
    note: Optional[str] = None


class AcceptanceManifest(BaseModel):
    rows: List[AcceptanceRow]

    def for_section(self, section: str) -> List[AcceptanceRow]:
        return [row for row in self.rows if row.section == section]


class SectionResult(BaseModel):
    """Everything one reproduced section produced: numbers to compare and a JSON-ready summary."""
    section: str
    measurements: Dict[str, float]
    summary: Dict[str, Any] = {}
