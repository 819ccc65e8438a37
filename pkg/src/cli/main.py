# src/cli/main.py
"""
Command-line front end: `borel-resum <command> [options]`.

Commands: eval, scan, sequence, diagnose, reproduce, export. Every command
writes `<command>.json` into the output directory; reproduce also writes the
figure CSVs and the acceptance table.

Exit status: 0 success, 2 bad input or configuration, 3 numerical failure,
4 acceptance failure in reproduce mode.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd
import yaml
from loguru import logger
from pydantic import ValidationError

from src import __version__
from src.core.bounds_diag import appendix_diagnostics, bound_verdict, grid_curves, lambda_grid, slope_checks
from src.core.errors import (
    AuxiliarySeriesError, InsufficientCoefficientsError, NoFixedPointError, ResummationError,
    SeriesFormatError, SeriesOrderError,
)
from src.core.extremum_scan import detect_fixed_point, scan_all, scan_extrema, select_principal
from src.core.orchestrator import ReproductionOrchestrator
from src.core.resum_engine import ResumEngine, get_engine
from src.core.series_core import BUILTIN_MODELS, auxiliary_series, builtin_series
from src.loaders.series_loader import dump_series, read_series_file
from src.models.resum_models import DerivativeWrt, SelectionRule
from src.models.run_models import Command, ReportBundle, RunConfig
from src.models.series_models import BuiltinModelId, CoefficientSeries
from src.processing.acceptance import AcceptanceChecker, load_manifest
from src.processing.report_writer import ReportWriter
from src.utils.config_loader import DEFAULT_CONFIG_PATH, FullConfig, get_config
from src.utils.log_setup import setup_logging

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4
DEFAULT_SEQUENCE_ORDERS = (1, 5)
CONFIG_ERRORS = (ValidationError, SeriesFormatError, SeriesOrderError, InsufficientCoefficientsError,
                 AuxiliarySeriesError, FileNotFoundError, yaml.YAMLError)


def parse_order_range(text: str) -> Tuple[int, int]:
    """'A..B' -> (A, B)."""
    try:
        low, high = text.split("..")
        return int(low), int(high)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an order range like 1..5, got '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="borel-resum",
                                     description="Variational Borel-conformal resummation of divergent series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="Path to config.yaml")
    parser.add_argument("--output-dir", default=None, help="Overrides storage.output_dir")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    def series_options(sub: argparse.ArgumentParser) -> None:
        source = sub.add_mutually_exclusive_group()
        source.add_argument("--builtin", choices=[m.value for m in BuiltinModelId])
        source.add_argument("--file", type=Path)
        sub.add_argument("--format", dest="file_format", choices=["json", "csv"], default=None)
        sub.add_argument("--auxiliary", action="store_true", help="Resum S/λ of a series with f_0 = 0")

    sub = commands.add_parser("eval", help="S_N(λ,p) with its term decomposition and derivatives")
    series_options(sub)
    sub.add_argument("--N", type=int, required=True)
    sub.add_argument("--lambda", dest="lam", type=float, required=True)
    sub.add_argument("--p", type=float, required=True)

    sub = commands.add_parser("scan", help="Stationary points of S_N(λ₀,p) in p")
    series_options(sub)
    sub.add_argument("--N", type=int, required=True)
    sub.add_argument("--lambda0", type=float, default=None)
    sub.add_argument("--p-min", type=float, default=None)
    sub.add_argument("--p-max", type=float, default=None)

    for name, help_text in (("sequence", "Selected extremum per order and the bound verdict"),
                            ("diagnose", "c(N), ΔS_N, α and slope diagnostics of a sequence"),
                            ("export", "Write the series file and S_N(λ) curves at the selected p(N)")):
        sub = commands.add_parser(name, help=help_text)
        series_options(sub)
        sub.add_argument("--N-range", type=parse_order_range, default=None)
        sub.add_argument("--lambda0", type=float, default=None)
        sub.add_argument("--p-min", type=float, default=None)
        sub.add_argument("--p-max", type=float, default=None)
        sub.add_argument("--rule", choices=[r.value for r in SelectionRule], default=SelectionRule.PRINCIPAL_MIN.value)

    sub = commands.add_parser("reproduce", help="Re-run the worked examples against the acceptance manifest")
    sub.add_argument("--section", choices=["sec31", "sec32", "sec33", "sec34", "sec35", "all"], default="all")
    return parser


def to_run_config(args: argparse.Namespace, config: FullConfig) -> RunConfig:
    values = {key: value for key, value in vars(args).items()
              if key not in ("config", "verbose", "output_dir") and value is not None}
    output_format = values.get("file_format") or "json"
    return RunConfig(**values, output_dir=Path(args.output_dir or config.storage.output_dir),
                     output_format=output_format)


# --- Command implementations ---
class CommandRunner:
    """Executes one RunConfig against a loaded configuration."""

    def __init__(self, config: FullConfig, engine: Optional[ResumEngine] = None):
        self.config = config
        self.engine = engine or get_engine(config.quadrature.to_spec(), config.quadrature.moment_order_floor,
                                           config.derivative.log_step)

    def series(self, run: RunConfig, order: int) -> CoefficientSeries:
        if run.builtin is not None:
            series = builtin_series(run.builtin, order + 1 if run.auxiliary else order)
        else:
            series = read_series_file(run.file, run.file_format)
        return auxiliary_series(series) if run.auxiliary else series

    def _max_order(self, run: RunConfig) -> int:
        if run.N is not None:
            return run.N
        if run.N_range is not None:
            return run.N_range[1]
        if run.builtin is not None and BUILTIN_MODELS[run.builtin].max_published_order is not None:
            return BUILTIN_MODELS[run.builtin].max_published_order - (1 if run.auxiliary else 0)
        return DEFAULT_SEQUENCE_ORDERS[1]

    def _lambda0(self, run: RunConfig) -> float:
        if run.lambda0 is not None:
            return run.lambda0
        return BUILTIN_MODELS[run.builtin].default_lambda0 if run.builtin is not None else 1.0

    def _orders(self, run: RunConfig, series: CoefficientSeries) -> List[int]:
        low, high = run.N_range or (DEFAULT_SEQUENCE_ORDERS[0], min(self._max_order(run), series.order))
        if high > series.order:
            raise SeriesOrderError(f"order {high} outside 0..{series.order} for '{series.name}'")
        return list(range(max(low, 1), high + 1))

    def _sequence(self, run: RunConfig):
        series = self.series(run, self._max_order(run))
        lambda0 = self._lambda0(run)
        scan_config = self.config.scan_config(lambda0, run.p_min, run.p_max)
        records = scan_all(series, self._orders(run, series), scan_config, self.engine, show_progress=True)
        sequence = select_principal(records, run.rule, self.config.fixed_point.p_window)
        return series, lambda0, records, sequence

    def eval(self, run: RunConfig) -> Dict[str, object]:
        if run.N is None or run.lam is None or run.p is None:
            raise SeriesOrderError("eval needs --N, --lambda and --p")
        series = self.series(run, run.N)
        evaluation = self.engine.evaluate(series, run.N, run.lam, run.p)
        derivatives = {wrt.value: self.engine.derivative(series, run.N, run.lam, run.p, wrt) for wrt in DerivativeWrt}
        logger.info("S_{}({}, {}) = {:.10g} for '{}'", run.N, run.lam, run.p, evaluation.value, series.name)
        return {"series": series.name, "evaluation": evaluation, "derivatives": derivatives}

    def scan(self, run: RunConfig) -> Dict[str, object]:
        if run.N is None:
            raise SeriesOrderError("scan needs --N")
        series = self.series(run, run.N)
        scan_config = self.config.scan_config(self._lambda0(run), run.p_min, run.p_max)
        records = scan_extrema(series, run.N, scan_config, self.engine)
        return {"series": series.name, "config": scan_config, "records": records}

    def sequence(self, run: RunConfig) -> Dict[str, object]:
        series, lambda0, records, sequence = self._sequence(run)
        grid = lambda_grid(lambda0, self.config.diagnostics.lambda_grid_points)
        verdict = bound_verdict(sequence, grid_curves(series, sequence, grid, self.engine))
        summary: Dict[str, object] = {"series": series.name, "lambda0": lambda0, "scan": records,
                                      "sequence": sequence, "verdict": verdict}
        try:
            summary["fixed_point"] = detect_fixed_point(records, self.config.fixed_point.p_window,
                                                        self.config.fixed_point.max_gap_ratio)
        except NoFixedPointError as e:
            summary["fixed_point"] = str(e)
        return summary

    def diagnose(self, run: RunConfig) -> Dict[str, object]:
        series, lambda0, _, sequence = self._sequence(run)
        settings = self.config.diagnostics
        grid = lambda_grid(lambda0, settings.lambda_grid_points)
        verdict = bound_verdict(sequence, grid_curves(series, sequence, grid, self.engine))
        report = appendix_diagnostics(series, sequence, lambda0, self.engine, settings.lambda_grid_points,
                                      settings.origin_epsilon, verdict)
        checks = slope_checks(series, sequence, grid, self.engine, origin_epsilon=settings.origin_epsilon)
        return {"series": series.name, "lambda0": lambda0, "sequence": sequence, "verdict": verdict,
                "diagnostics": report, "slope_checks": checks}

    def export(self, run: RunConfig, writer: ReportWriter) -> Tuple[Dict[str, object], List[str]]:
        series, lambda0, _, sequence = self._sequence(run)
        upper = BUILTIN_MODELS[run.builtin].lambda_range[1] if run.builtin is not None else lambda0
        lambdas = lambda_grid(upper, self.config.reproduce.curve_points)
        frame = pd.DataFrame({"lambda": lambdas})
        for N, values in grid_curves(series, sequence, lambdas, self.engine).items():
            frame[f"N{N}"] = values
        series_path = writer.write_text(f"{series.name}.{run.output_format}", dump_series(series, run.output_format))
        curve_path = writer.write_csv(f"{series.name}_curves.csv", frame)
        return {"series": series.name, "sequence": sequence}, [str(series_path), str(curve_path)]

    def reproduce(self, run: RunConfig, writer: ReportWriter) -> ReportBundle:
        orchestrator = ReproductionOrchestrator(self.config, self.engine)
        checker = AcceptanceChecker(load_manifest(self.config.reproduce.manifest_path))
        outcomes = orchestrator.run(run.section)
        files: List[str] = []
        tables = []
        for section, outcome in outcomes.items():
            tables.append(checker.check(section, outcome.result.measurements))
            for name, frame in outcome.curves.items():
                files.append(str(writer.write_csv(f"{section}_{name}.csv", frame)))
        table = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame()
        files.append(str(writer.write_csv("acceptance.csv", table)))
        failed = int((~table["passed"].astype(bool)).sum()) if len(table) else 0
        summary = {"provenance": orchestrator.provenance(),
                   "sections": {section: outcome.result for section, outcome in outcomes.items()},
                   "acceptance": {"rows": len(table), "failed": failed}}
        files.append(str(writer.write_json("summary.json", summary)))
        return ReportBundle(summary=summary, files=files, exit_status=EXIT_ACCEPTANCE if failed else EXIT_OK)


def run_command(run: RunConfig, config: FullConfig, engine: Optional[ResumEngine] = None) -> ReportBundle:
    runner = CommandRunner(config, engine)
    writer = ReportWriter(run.output_dir)
    if run.command is Command.REPRODUCE:
        return runner.reproduce(run, writer)
    files: List[str] = []
    if run.command is Command.EXPORT:
        summary, files = runner.export(run, writer)
    else:
        summary = getattr(runner, run.command.value)(run)
    files.append(str(writer.write_json(f"{run.command.value}.json", summary)))
    return ReportBundle(summary=summary, files=files, exit_status=EXIT_OK)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = get_config(args.config)
        setup_logging(config.storage.log_path, "DEBUG" if args.verbose else "INFO")
        bundle = run_command(to_run_config(args, config), config)
    except CONFIG_ERRORS as e:
        logger.error(f"❌ Invalid input: {e}")
        return EXIT_CONFIG
    except ResummationError as e:
        logger.error(f"❌ Numerical failure: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"❌ Invalid input: {e}")
        return EXIT_CONFIG
    for path in bundle.files:
        logger.info(f"✅ Wrote {path}")
    return bundle.exit_status


if __name__ == "__main__":
    sys.exit(main())
