# src/processing/acceptance.py
"""Compares computed section measurements against the tolerance manifest (config/acceptance.yaml)."""

import math
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd
import yaml
from loguru import logger

from src.models.report_models import AcceptanceManifest, AcceptanceMode, AcceptanceRow

COLUMNS = ["section", "key", "expected", "computed", "tolerance", "mode", "passed", "note"]


def load_manifest(path: Union[str, Path]) -> AcceptanceManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Acceptance manifest not found at '{path}'")
    with open(path, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    return AcceptanceManifest(**raw)


def row_passes(row: AcceptanceRow, computed: float) -> bool:
    if computed is None or not math.isfinite(computed):
        return False
    if row.mode is AcceptanceMode.ABS:
        return abs(computed - row.expected) <= row.tolerance
    if row.mode is AcceptanceMode.REL:
        return abs(computed - row.expected) <= row.tolerance * abs(row.expected)
    if row.mode is AcceptanceMode.UPPER_BOUND:
        return computed <= row.expected + row.tolerance
    return computed == row.expected


class AcceptanceChecker:
    """Builds the pass/fail table for one or more reproduced sections."""

    def __init__(self, manifest: AcceptanceManifest):
        self.manifest = manifest

    def check(self, section: str, measurements: Dict[str, float]) -> pd.DataFrame:
        logger.info(f"--- 🔎 Checking acceptance rows for {section} ---")
        rows: List[dict] = []
        for row in self.manifest.for_section(section):
            computed = measurements.get(row.key)
            passed = row_passes(row, computed)
            rows.append({"section": section, "key": row.key, "expected": row.expected,
                         "computed": float("nan") if computed is None else computed, "tolerance": row.tolerance,
                         "mode": row.mode.value, "passed": passed, "note": row.note or ""})
            if not passed:
                logger.warning(f"  - {section}/{row.key}: expected {row.expected} ({row.mode.value} ±{row.tolerance}), "
                               f"computed {computed}")
        table = pd.DataFrame(rows, columns=COLUMNS)
        passed = int(table["passed"].astype(bool).sum())
        logger.info(f"{section} summary: ✅ Passed: {passed} | ❌ Failed: {len(table) - passed}")
        return table
