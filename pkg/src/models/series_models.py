# src/models/series_models.py
"""
Pydantic models for perturbation series and their metadata.

Everything downstream (the resummation engine, the extremum scan, the
diagnostics) consumes a CoefficientSeries, so its invariants are enforced
here at construction time.
"""

import math
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SeriesOrigin(str, Enum):
    FILE = "file"
    BUILTIN = "builtin"
    AUXILIARY = "auxiliary"


class BuiltinModelId(str, Enum):
    PROTOTYPE = "prototype"
    GEOMETRIC = "geometric"
    PV_MODEL = "pv_model"
    EULER_HEISENBERG = "euler_heisenberg"
    BETA_POLYMER = "beta_polymer"


class CoefficientSeries(BaseModel):
    """Coefficients f_0..f_N of a perturbation series in the coupling λ."""
    model_config = ConfigDict(frozen=True)

    name: str
    coefficients: Tuple[float, ...]
    prefactor: float = 1.0
    origin: SeriesOrigin = SeriesOrigin.FILE
    model_id: Optional[BuiltinModelId] = None
    parent: Optional[str] = None

    @field_validator("coefficients")
    @classmethod
    def _finite_and_non_empty(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("empty coefficient list")
        for index, coefficient in enumerate(value):
            if not math.isfinite(coefficient):
                raise ValueError(f"coefficients[{index}] is not finite ({coefficient})")
        return value

    @field_validator("prefactor")
    @classmethod
    def _usable_prefactor(cls, value: float) -> float:
        if not math.isfinite(value) or value == 0.0:
            raise ValueError(f"prefactor must be finite and nonzero, got {value}")
        return value

    @model_validator(mode="after")
    def _auxiliary_has_parent(self) -> "CoefficientSeries":
        if self.origin is SeriesOrigin.AUXILIARY and not self.parent:
            raise ValueError("an auxiliary series must name its parent")
        return self

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_auxiliary(self) -> bool:
        return self.origin is SeriesOrigin.AUXILIARY

    def truncated(self, max_order: int) -> "CoefficientSeries":
        return self.model_copy(update={"coefficients": self.coefficients[: max_order + 1]})


class BernoulliTable(BaseModel):
    """Exact Bernoulli numbers B_0, B_2, B_4, ... keyed by their (even) index."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: Dict[int, Fraction]

    @field_validator("entries")
    @classmethod
    def _even_indices_only(cls, value: Dict[int, Fraction]) -> Dict[int, Fraction]:
        odd = [index for index in value if index % 2]
        if odd:
            raise ValueError(f"only even indices are stored, got {odd}")
        return value

    @property
    def max_index(self) -> int:
        return max(self.entries)

    def __getitem__(self, index: int) -> Fraction:
        return self.entries[index]


class BuiltinModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: BuiltinModelId
    description: str
    default_lambda0: float = Field(gt=0)
    lambda_range: Tuple[float, float]
    prefactor: float = 1.0
    max_published_order: Optional[int] = None
