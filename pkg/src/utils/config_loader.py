# src/utils/config_loader.py
# Pydantic model of config/config.yaml plus the environment-substitution pass.

import os
import re
from functools import lru_cache
from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple

import yaml
from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from src.models.resum_models import QuadratureRule, QuadratureSpec, ScanConfig

load_dotenv()
ENV_VAR_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-(.*?))?\}")
DEFAULT_CONFIG_PATH = "config/config.yaml"


def substitute_env_vars(config_item: Any) -> Any:
    if isinstance(config_item, dict): return {key: substitute_env_vars(value) for key, value in config_item.items()}
    if isinstance(config_item, list): return [substitute_env_vars(item) for item in config_item]
    if isinstance(config_item, str):
        for match in ENV_VAR_PATTERN.finditer(config_item):
            env_var_name, default = match.group(1), match.group(2)
            env_var_value = os.getenv(env_var_name, default)
            if env_var_value is None: raise ValueError(f"Required environment variable '{env_var_name}' is not set!")
            config_item = config_item.replace(match.group(0), env_var_value)
    return config_item


# --- Pydantic Models for Full Config Validation ---
class QuadratureConfig(BaseModel):
    rule: QuadratureRule = QuadratureRule.ADAPTIVE_EXP_TAIL
    node_count: int = Field(200, ge=16)
    rel_tol: float = Field(1e-12, gt=0)
    abs_tol: float = Field(1e-14, gt=0)
    moment_order_floor: int = Field(16, ge=1)

    def to_spec(self) -> QuadratureSpec:
        return QuadratureSpec(rule=self.rule, node_count=self.node_count, rel_tol=self.rel_tol, abs_tol=self.abs_tol)

class DerivativeConfig(BaseModel): log_step: float = Field(1e-4, gt=0, lt=0.1)
class ScanSettings(BaseModel):
    p_min: float = Field(1e-2, gt=0)
    p_max: float = Field(1e3, gt=0)
    grid_points_per_decade: int = Field(60, ge=20)
    refine_tol: float = Field(1e-6, gt=0)
    inflexion_ratio: float = Field(1e-3, gt=0)

class FixedPointConfig(BaseModel): p_window: Tuple[float, float] = (0.3, 3.0); max_gap_ratio: float = Field(0.9, gt=0, le=1)
class DiagnosticsConfig(BaseModel): lambda_grid_points: int = Field(20, ge=2); origin_epsilon: float = Field(1e-5, gt=0)
class ReproduceConfig(BaseModel): manifest_path: str = "config/acceptance.yaml"; workers: int = Field(1, ge=1); curve_points: int = Field(41, ge=3)
class StorageConfig(BaseModel): output_dir: str = "reports"; log_path: Optional[str] = None


class FullConfig(BaseModel):
    """The root Pydantic model for config/config.yaml."""
    quadrature: QuadratureConfig = QuadratureConfig()
    derivative: DerivativeConfig = DerivativeConfig()
    scan: ScanSettings = ScanSettings()
    fixed_point: FixedPointConfig = FixedPointConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    reproduce: ReproduceConfig = ReproduceConfig()
    storage: StorageConfig = StorageConfig()

    @model_validator(mode="after")
    def _window_is_ordered(self) -> "FullConfig":
        if self.scan.p_min >= self.scan.p_max:
            raise ValueError(f"scan.p_min ({self.scan.p_min}) must be below scan.p_max ({self.scan.p_max})")
        lo, hi = self.fixed_point.p_window
        if not 0 < lo < hi:
            raise ValueError(f"fixed_point.p_window must be an increasing positive interval, got {self.fixed_point.p_window}")
        return self

    def scan_config(self, lambda0: float, p_min: Optional[float] = None, p_max: Optional[float] = None) -> ScanConfig:
        return ScanConfig(
            lambda0=lambda0,
            p_min=self.scan.p_min if p_min is None else p_min,
            p_max=self.scan.p_max if p_max is None else p_max,
            grid_points_per_decade=self.scan.grid_points_per_decade,
            refine_tol=self.scan.refine_tol,
            inflexion_ratio=self.scan.inflexion_ratio,
            quad=self.quadrature.to_spec(),
        )


@lru_cache()
def get_config(config_path: str = DEFAULT_CONFIG_PATH) -> FullConfig:
    try:
        config_path_obj = Path(config_path)
        if not config_path_obj.exists(): raise FileNotFoundError(f"Configuration file not found at '{config_path}'")
        with open(config_path_obj, 'r', encoding='utf-8') as f: raw_config = yaml.safe_load(f) or {}
        resolved_config = substitute_env_vars(raw_config)
        validated_config = FullConfig(**resolved_config)
        logger.debug("Configuration loaded, resolved, and validated from {}", config_path)
        return validated_config
    except Exception as e:
        logger.error(f"Could not load configuration from '{config_path}'. Error: {e}")
        raise
