# src/loaders/series_loader.py
"""
Reads and writes coefficient files.

JSON: {"name": str, "prefactor": number (optional, default 1), "coefficients": [number, ...]}
CSV:  comma-separated coefficients, optional '#' comment lines; '# name: ...'
      and '# prefactor: ...' headers are honoured so exports re-ingest losslessly.
"""

import io
import json
import math
import numbers
import re
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Union

import pandas as pd
from loguru import logger

from src.core.errors import SeriesFormatError
from src.models.series_models import CoefficientSeries, SeriesOrigin

Source = Union[bytes, str, IO]
HEADER_PATTERN = re.compile(r"^#\s*(name|prefactor)\s*:\s*(.*?)\s*$", re.IGNORECASE)
FORMATS = ("json", "csv")


def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SeriesFormatError(f"document is not UTF-8 ({e})") from e
    return source


def _as_coefficient(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise SeriesFormatError(f"expected a number, got {value!r}", field=field)
    value = float(value)
    if not math.isfinite(value):
        raise SeriesFormatError(f"non-finite entry {value}", field=field)
    return value


def _build(name: str, coefficients: List[float], prefactor: float) -> CoefficientSeries:
    if not coefficients:
        raise SeriesFormatError("empty coefficient list", field="coefficients")
    if not math.isfinite(prefactor) or prefactor == 0.0:
        raise SeriesFormatError(f"must be finite and nonzero, got {prefactor}", field="prefactor")
    return CoefficientSeries(name=name, coefficients=tuple(coefficients), prefactor=prefactor,
                             origin=SeriesOrigin.FILE)


def _load_json(text: str) -> CoefficientSeries:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise SeriesFormatError(f"malformed JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(document, dict):
        raise SeriesFormatError("top-level value must be an object")
    if "coefficients" not in document:
        raise SeriesFormatError("missing", field="coefficients")
    raw = document["coefficients"]
    if not isinstance(raw, list):
        raise SeriesFormatError("must be a list", field="coefficients")
    name = document.get("name", "series")
    if not isinstance(name, str):
        raise SeriesFormatError("must be a string", field="name")
    prefactor = _as_coefficient(document.get("prefactor", 1.0), "prefactor")
    coefficients = [_as_coefficient(value, f"coefficients[{i}]") for i, value in enumerate(raw)]
    return _build(name, coefficients, prefactor)


def _load_csv(text: str) -> CoefficientSeries:
    headers: Dict[str, str] = {}
    for line in text.splitlines():
        match = HEADER_PATTERN.match(line.strip())
        if match:
            headers[match.group(1).lower()] = match.group(2)

    body = "\n".join(line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#"))
    coefficients: List[float] = []
    if body:
        try:
            frame = pd.read_csv(io.StringIO(body), header=None, dtype=str, skipinitialspace=True, na_filter=False)
        except (pd.errors.ParserError, ValueError) as e:
            raise SeriesFormatError(f"malformed CSV ({e})") from e
        cells = [cell for cell in frame.to_numpy().ravel() if isinstance(cell, str) and cell.strip()]
        for i, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise SeriesFormatError(f"not a number: {cell!r}", field=f"coefficients[{i}]") from None
            coefficients.append(_as_coefficient(value, f"coefficients[{i}]"))

    try:
        prefactor = float(headers.get("prefactor", 1.0))
    except ValueError:
        raise SeriesFormatError(f"not a number: {headers['prefactor']!r}", field="prefactor") from None
    return _build(headers.get("name", "series"), coefficients, prefactor)


def load_series(source: Source, fmt: str = "json") -> CoefficientSeries:
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise SeriesFormatError(f"unknown format '{fmt}', expected one of {FORMATS}", field="format")
    text = _read_text(source)
    series = _load_json(text) if fmt == "json" else _load_csv(text)
    logger.debug("Loaded series '{}' of order {} from {}", series.name, series.order, fmt.upper())
    return series


def read_series_file(path: Union[str, Path], fmt: Optional[str] = None) -> CoefficientSeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Series file not found: {path}")
    fmt = fmt or path.suffix.lstrip(".").lower()
    with open(path, "rb") as f:
        return load_series(f, fmt)


def dump_series(series: CoefficientSeries, fmt: str = "json") -> str:
    fmt = fmt.lower()
    if fmt == "json":
        payload = {"name": series.name, "prefactor": series.prefactor, "coefficients": list(series.coefficients)}
        return json.dumps(payload, indent=2)
    if fmt == "csv":
        row = pd.DataFrame([list(series.coefficients)])
        header = f"# name: {series.name}\n# prefactor: {series.prefactor!r}\n"
        return header + row.to_csv(header=False, index=False)
    raise SeriesFormatError(f"unknown format '{fmt}', expected one of {FORMATS}", field="format")
