# src/utils/log_setup.py
import sys
from pathlib import Path
from typing import Optional

from loguru import logger

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} [{level: <8}] [{module: <20}] {message}"


def setup_logging(log_path: Optional[str] = None, level: str = "INFO") -> None:
    """Replaces loguru's default sink with stderr plus an optional log file."""
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    if log_path:
        path = Path(log_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(path, level="DEBUG", format=LOG_FORMAT, mode="w", encoding="utf-8")
        logger.info(f"Logging initialized. Log file at: {path}")
