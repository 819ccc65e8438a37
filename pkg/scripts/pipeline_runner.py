# scripts/pipeline_runner.py
# Reproduces every worked example as its own logged step and writes the bundle under storage.output_dir.

import argparse
import sys
from pathlib import Path

from loguru import logger

# --- Dynamic Path Setup ---
project_root = Path(__file__).resolve().parents[1]
sys.path.append(str(project_root))

from src.cli.main import EXIT_ACCEPTANCE, EXIT_OK, run_command
from src.core.orchestrator import SECTIONS
from src.models.run_models import Command, RunConfig
from src.utils.config_loader import DEFAULT_CONFIG_PATH, get_config
from src.utils.log_setup import setup_logging

STEP_NAMES = {
    "sec31": "Prototype series 1/(1+z)",
    "sec32": "Geometric series",
    "sec33": "Principal-value model",
    "sec34": "Euler-Heisenberg weak-field series",
    "sec35": "Polymer beta function",
}


def run_step(step_name: str, step_function) -> int:
    logger.info(f"🚀 --- Starting Step: {step_name} ---")
    try:
        status = step_function()
        marker = "✅ --- Completed" if status == EXIT_OK else "⚠️ --- Completed with acceptance failures"
        logger.info(f"{marker} Step: {step_name} ---")
        return status
    except Exception:
        logger.exception(f"❌ --- FAILED Step: {step_name} ---")
        return -1


def main() -> int:
    parser = argparse.ArgumentParser(description="Variational resummation reproduction runner.")
    parser.add_argument("--config", default=DEFAULT_CONFIG_PATH)
    parser.add_argument("--output-dir", default=None)
    args = parser.parse_args()

    config = get_config(args.config)
    setup_logging(config.storage.log_path)
    output_dir = Path(args.output_dir or config.storage.output_dir)

    logger.info("=====================================================")
    logger.info("==      Starting Resummation Reproduction Run      ==")
    logger.info("=====================================================")

    statuses = {}
    for section in SECTIONS:
        run = RunConfig(command=Command.REPRODUCE, section=section, output_dir=output_dir / section)
        statuses[section] = run_step(STEP_NAMES[section], lambda run=run: run_command(run, config).exit_status)

    logger.info("=====================================================")
    logger.info("==         Reproduction Run Finished               ==")
    logger.info("=====================================================")
    for section, status in statuses.items():
        logger.info(f"  {section}: {'ok' if status == EXIT_OK else 'acceptance failures' if status == EXIT_ACCEPTANCE else 'failed'}")
    return EXIT_OK if all(status == EXIT_OK for status in statuses.values()) else EXIT_ACCEPTANCE


if __name__ == "__main__":
    sys.exit(main())
