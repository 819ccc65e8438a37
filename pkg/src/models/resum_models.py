# src/models/resum_models.py
"""Models shared by the resummation engine and the extremum scan."""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class QuadratureRule(str, Enum):
    GAUSS_LAGUERRE = "gauss_laguerre"
    ADAPTIVE_EXP_TAIL = "adaptive_exp_tail"


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: QuadratureRule = QuadratureRule.ADAPTIVE_EXP_TAIL
    node_count: int = Field(200, ge=16)
    rel_tol: float = Field(1e-12, gt=0)
    abs_tol: float = Field(1e-14, gt=0)

    @property
    def fingerprint(self) -> Tuple[str, int, str, str]:
        return (self.rule.value, self.node_count, self.rel_tol.hex(), self.abs_tol.hex())


class ConformalParams(BaseModel):
    """Parameter of the conformal map w(z); p > 0 and finite."""
    model_config = ConfigDict(frozen=True)

    p: float = Field(gt=0, allow_inf_nan=False)


class ResumEvaluation(BaseModel):
    """S_N(λ,p) together with its decomposition S = Σ A_n / pⁿ."""
    model_config = ConfigDict(frozen=True)

    value: float
    N: int
    lam: float
    p: float
    terms: List[float]
    quadrature_error_estimate: float

    def recombined(self) -> float:
        return sum(term / self.p ** n for n, term in enumerate(self.terms))


class DerivativeWrt(str, Enum):
    P = "p"
    LAMBDA = "lambda"


class DerivativeEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    wrt: DerivativeWrt
    at: float
    value: float
    log_value: float
    error: float
    low_confidence: bool = False


class ScanConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda0: float = Field(1.0, gt=0)
    p_min: float = Field(1e-2, gt=0)
    p_max: float = Field(1e3, gt=0)
    grid_points_per_decade: int = Field(60, ge=20)
    refine_tol: float = Field(1e-6, gt=0)
    inflexion_ratio: float = Field(1e-3, gt=0)
    quad: QuadratureSpec = QuadratureSpec()

    @model_validator(mode="after")
    def _ordered_window(self) -> "ScanConfig":
        if self.p_min >= self.p_max:
            raise ValueError(f"p_min ({self.p_min}) must be below p_max ({self.p_max})")
        return self


class ExtremumKind(str, Enum):
    GLOBAL_MIN = "global_min"
    LOCAL_MIN = "local_min"
    LOCAL_MAX = "local_max"
    GLOBAL_MAX = "global_max"
    INFLEXION = "inflexion"

    @property
    def is_min(self) -> bool:
        return self in (ExtremumKind.GLOBAL_MIN, ExtremumKind.LOCAL_MIN)

    @property
    def is_max(self) -> bool:
        return self in (ExtremumKind.GLOBAL_MAX, ExtremumKind.LOCAL_MAX)


class WindowFlags(BaseModel):
    model_config = ConfigDict(frozen=True)

    touches_p_min: bool = False
    touches_p_max: bool = False


class ExtremumRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    p_star: float
    S_value: float
    kind: ExtremumKind
    curvature_sign: int
    second_difference: float
    derivative_residual: float
    window_flags: WindowFlags = WindowFlags()


class SelectionRule(str, Enum):
    PRINCIPAL_MIN = "principal_min"
    PRINCIPAL_MAX = "principal_max"
    BAR_BRANCH = "bar_branch"
    FIXED_POINT_BRANCH = "fixed_point_branch"


class SequenceEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    record: Optional[ExtremumRecord] = None
    note: Optional[str] = None


class ExtremumSequence(BaseModel):
    """One selected record (or a 'no solution' note) per order N."""
    model_config = ConfigDict(frozen=True)

    entries: List[SequenceEntry]
    selection_rule: SelectionRule

    @model_validator(mode="after")
    def _one_entry_per_order(self) -> "ExtremumSequence":
        orders = [entry.N for entry in self.entries]
        if len(orders) != len(set(orders)):
            raise ValueError(f"duplicate orders in sequence: {orders}")
        return self

    def found(self) -> List[ExtremumRecord]:
        return [entry.record for entry in sorted(self.entries, key=lambda e: e.N) if entry.record is not None]

    def by_order(self) -> Dict[int, ExtremumRecord]:
        return {record.N: record for record in self.found()}

    def restricted_to(self, kinds: Tuple[ExtremumKind, ...]) -> "ExtremumSequence":
        entries = []
        for entry in self.entries:
            if entry.record is not None and entry.record.kind not in kinds:
                entries.append(SequenceEntry(N=entry.N, note=f"excluded ({entry.record.kind.value})"))
            else:
                entries.append(entry)
        return ExtremumSequence(entries=entries, selection_rule=self.selection_rule)


class FixedPointCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    orders: List[int]
    p_values: List[float]
    kinds: List[ExtremumKind]
    limit_estimate: float
    alternation: bool
    heuristic: bool = True

    @property
    def singularity_estimate(self) -> float:
        """Borel-plane singularity location z = -1/p₀ implied by the limit."""
        return -1.0 / self.limit_estimate
