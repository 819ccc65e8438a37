# src/models/run_models.py
"""Models of one CLI invocation and of the bundle it produces."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.resum_models import SelectionRule
from src.models.series_models import BuiltinModelId


class Command(str, Enum):
    EVAL = "eval"
    SCAN = "scan"
    SEQUENCE = "sequence"
    DIAGNOSE = "diagnose"
    REPRODUCE = "reproduce"
    EXPORT = "export"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Command
    builtin: Optional[BuiltinModelId] = None
    file: Optional[Path] = None
    file_format: Optional[str] = None
    N: Optional[int] = Field(None, ge=0)
    N_range: Optional[Tuple[int, int]] = None
    lam: Optional[float] = Field(None, gt=0)
    lambda0: Optional[float] = Field(None, gt=0)
    p: Optional[float] = Field(None, gt=0)
    p_min: Optional[float] = Field(None, gt=0)
    p_max: Optional[float] = Field(None, gt=0)
    rule: SelectionRule = SelectionRule.PRINCIPAL_MIN
    auxiliary: bool = False
    section: str = "all"
    output_dir: Path
    output_format: str = "json"

    @model_validator(mode="after")
    def _one_series_source(self) -> "RunConfig":
        if self.command is Command.REPRODUCE:
            return self
        if (self.builtin is None) == (self.file is None):
            raise ValueError("exactly one series source is required: --builtin or --file")
        if self.N_range is not None and self.N_range[0] > self.N_range[1]:
            raise ValueError(f"empty order range {self.N_range[0]}..{self.N_range[1]}")
        return self


class ReportBundle(BaseModel):
    summary: Dict[str, Any]
    files: List[str] = []
    exit_status: int = 0
