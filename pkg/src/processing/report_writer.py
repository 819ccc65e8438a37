# src/processing/report_writer.py
"""Atomic JSON/CSV writers for report bundles (write to a temp file, then rename)."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel


def to_jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ReportWriter:
    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _atomic_write(self, name: str, text: str) -> Path:
        target = self.output_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(temp_path, target)
        except BaseException:
            if os.path.exists(temp_path):
                os.unlink(temp_path)
            raise
        logger.debug("Wrote {}", target)
        return target

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        return self._atomic_write(name, json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self._atomic_write(name, frame.to_csv(index=False))

    def write_text(self, name: str, text: str) -> Path:
        return self._atomic_write(name, text)
