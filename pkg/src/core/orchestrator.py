# src/core/orchestrator.py
"""
Reproduces the worked examples section by section.

Each section handler runs the full pipeline for one example series (scan,
selection, bound verdict, diagnostics, oracle comparison), returns the numbers
the acceptance manifest checks, a JSON-ready summary, and the figure datasets
as λ-grid tables.
"""

from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from loguru import logger

from src import __version__
from src.core.bounds_diag import (
    ResummedCurve, appendix_diagnostics, bound_verdict, grid_curves, lambda_grid, slope_checks,
)
from src.core.errors import NoFixedPointError, NoZeroInBracketError
from src.core.extremum_scan import detect_fixed_point, scan_all, select_principal
from src.core.oracles import LITERATURE_FIXED_POINT, exact_sum, pv_split, zero_and_slope
from src.core.resum_engine import ResumEngine, get_engine
from src.core.series_core import BUILTIN_MODELS, auxiliary_series, builtin_series, partial_sums
from src.models.report_models import BoundDirection, SectionResult
from src.models.resum_models import ExtremumKind, ExtremumSequence, SelectionRule
from src.models.series_models import BuiltinModelId, CoefficientSeries
from src.utils.config_loader import FullConfig

SECTIONS = ("sec31", "sec32", "sec33", "sec34", "sec35")
BETA_ZERO_BRACKET = (1.0, 2.0)


class SectionOutcome(NamedTuple):
    result: SectionResult
    curves: Dict[str, pd.DataFrame]


def _flag(condition: bool) -> float:
    return 1.0 if condition else 0.0


class ReproductionOrchestrator:
    """Routes a section id to the handler that reproduces that example."""

    def __init__(self, config: FullConfig, engine: Optional[ResumEngine] = None):
        self.config = config
        self.engine = engine or get_engine(config.quadrature.to_spec(), config.quadrature.moment_order_floor,
                                           config.derivative.log_step)
        self.handlers: Dict[str, Callable[[], SectionOutcome]] = {
            "sec31": self._prototype,
            "sec32": self._geometric,
            "sec33": self._principal_value,
            "sec34": self._euler_heisenberg,
            "sec35": self._beta_function,
        }

    def run_section(self, section: str) -> SectionOutcome:
        if section not in self.handlers:
            raise ValueError(f"unknown section '{section}', expected one of {SECTIONS}")
        logger.info(f"Reproducing {section}")
        return self.handlers[section]()

    def run(self, section: str = "all") -> Dict[str, SectionOutcome]:
        sections: List[str] = list(SECTIONS) if section == "all" else [section]
        for name in sections:
            if name not in self.handlers:
                raise ValueError(f"unknown section '{name}', expected one of {SECTIONS}")
        workers = min(self.config.reproduce.workers, len(sections))
        if workers <= 1:
            return {name: self.run_section(name) for name in sections}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {name: pool.submit(self.run_section, name) for name in sections}
            return {name: futures[name].result() for name in sections}

    def provenance(self) -> Dict[str, object]:
        return {
            "tool": "borel-resum",
            "version": __version__,
            "config": self.config.model_dump(mode="json"),
            "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    # --- shared steps ---
    def _scan(self, series: CoefficientSeries, orders: Iterable[int], lambda0: float):
        return scan_all(series, orders, self.config.scan_config(lambda0), self.engine)

    def _grid(self, model: BuiltinModelId) -> np.ndarray:
        return lambda_grid(BUILTIN_MODELS[model].lambda_range[1], self.config.reproduce.curve_points)

    def _curves(self, series: CoefficientSeries, sequence: ExtremumSequence, lambdas: np.ndarray,
                reconstruct: Optional[bool] = None) -> Dict[int, np.ndarray]:
        return grid_curves(series, sequence, lambdas, self.engine, reconstruct)

    @staticmethod
    def _frame(lambdas: np.ndarray, columns: Dict[str, np.ndarray]) -> pd.DataFrame:
        frame = pd.DataFrame({"lambda": lambdas})
        for name, values in columns.items():
            frame[name] = values
        return frame

    def _sequence_measurements(self, sequence: ExtremumSequence, prefix: str, orders: Iterable[int],
                               measurements: Dict[str, float]) -> None:
        found = sequence.by_order()
        for N in orders:
            if N in found:
                measurements[f"{prefix}_{N}"] = found[N].p_star

    def _values_at(self, series: CoefficientSeries, sequence: ExtremumSequence, lam: float, prefix: str,
                   measurements: Dict[str, float]) -> None:
        for record in sequence.found():
            measurements[f"{prefix}_{record.N}"] = self.engine.evaluate(series, record.N, lam, record.p_star).value

    def _diagnostics(self, series: CoefficientSeries, sequence: ExtremumSequence, lambda0: float, verdict):
        diag = self.config.diagnostics
        return appendix_diagnostics(series, sequence, lambda0, self.engine, diag.lambda_grid_points,
                                    diag.origin_epsilon, verdict)

    def _verdict(self, series: CoefficientSeries, sequence: ExtremumSequence, lambda0: float, reconstruct=None):
        grid = lambda_grid(lambda0, self.config.diagnostics.lambda_grid_points)
        return bound_verdict(sequence, self._curves(series, sequence, grid, reconstruct=reconstruct))

    @staticmethod
    def _through(sequence: ExtremumSequence, max_order: int) -> ExtremumSequence:
        return ExtremumSequence(entries=[e for e in sequence.entries if e.N <= max_order],
                                selection_rule=sequence.selection_rule)

    # --- sections ---
    def _prototype(self) -> SectionOutcome:
        series = builtin_series(BuiltinModelId.PROTOTYPE, 7)
        records = self._scan(series, range(1, 6), 1.0)
        principal = select_principal(records, SelectionRule.PRINCIPAL_MIN)
        m: Dict[str, float] = {"n1_solutions": float(len(records[1]))}
        self._sequence_measurements(principal, "p", (2, 3, 4), m)
        for record in principal.found():
            m[f"global_{record.N}"] = _flag(record.kind is ExtremumKind.GLOBAL_MIN)
        self._values_at(series, principal, 0.5, "S", m)
        m["exact_lambda_0_5"] = exact_sum(BuiltinModelId.PROTOTYPE, 0.5)

        summary: Dict[str, object] = {}
        lambdas = self._grid(BuiltinModelId.PROTOTYPE)
        exact = np.array([exact_sum(BuiltinModelId.PROTOTYPE, lam) for lam in lambdas])
        curves = {"fig1a_partial_sums": self._frame(lambdas, {
            **{f"N{N}": v for N, v in partial_sums(series, [2, 3, 4, 5], lambdas).items()}, "exact": exact})}
        try:
            fixed = detect_fixed_point(records, self.config.fixed_point.p_window, self.config.fixed_point.max_gap_ratio)
            for N, p in zip(fixed.orders, fixed.p_values):
                m[f"p0_{N}"] = p
                m[f"S0_{N}"] = self.engine.evaluate(series, N, 0.5, p).value
            m["p0_limit"] = fixed.limit_estimate
            summary["fixed_point"] = fixed
            curves["fig1c_fixed_point_branch"] = self._frame(lambdas, {
                **{f"N{N}": ResummedCurve(series, N, p, self.engine).values(lambdas)
                   for N, p in zip(fixed.orders, fixed.p_values)}, "exact": exact})
        except NoFixedPointError as e:
            summary["fixed_point"] = str(e)

        quoted = self._through(principal, 4)
        verdict = self._verdict(series, quoted, 1.0)
        m["verdict_lower_bound"] = _flag(verdict.direction is BoundDirection.LOWER_BOUND)
        diagnostics = self._diagnostics(series, quoted, 1.0, verdict)
        m["magic_sign_matches"] = _flag(bool(diagnostics.magic_sign_matches))
        curves["fig1b_principal"] = self._frame(lambdas, {
            **{f"N{N}": v for N, v in self._curves(series, principal, lambdas).items()}, "exact": exact})
        summary.update(scan=records, principal=principal, verdict=verdict, diagnostics=diagnostics)
        return SectionOutcome(SectionResult(section="sec31", measurements=m, summary=summary), curves)

    def _geometric(self) -> SectionOutcome:
        series = builtin_series(BuiltinModelId.GEOMETRIC, 6)
        records = self._scan(series, range(1, 6), 1.0)
        principal = select_principal(records, SelectionRule.PRINCIPAL_MIN)
        m: Dict[str, float] = {}
        self._sequence_measurements(principal, "p", (2, 3, 4), m)
        self._values_at(series, principal, 0.8, "S", m)
        m["exact_lambda_0_8"] = exact_sum(BuiltinModelId.GEOMETRIC, 0.8)
        summary: Dict[str, object] = {}
        try:
            summary["fixed_point"] = detect_fixed_point(records, self.config.fixed_point.p_window,
                                                        self.config.fixed_point.max_gap_ratio)
            m["fixed_point_found"] = 1.0
        except NoFixedPointError as e:
            summary["fixed_point"] = str(e)
            m["fixed_point_found"] = 0.0

        chain = principal.restricted_to((ExtremumKind.GLOBAL_MIN, ExtremumKind.LOCAL_MIN))
        chain = self._through(chain, 4)
        verdict = self._verdict(series, chain, 1.0)
        m["verdict_lower_bound"] = _flag(verdict.direction is BoundDirection.LOWER_BOUND)
        diagnostics = self._diagnostics(series, chain, 1.0, verdict)
        m["magic_sign_matches"] = _flag(bool(diagnostics.magic_sign_matches))

        lambdas = self._grid(BuiltinModelId.GEOMETRIC)
        exact = 1.0 / (1.0 + lambdas)
        curves = {
            "fig2a_partial_sums": self._frame(lambdas, {
                **{f"N{N}": v for N, v in partial_sums(series, [2, 3, 4, 5], lambdas).items()}, "exact": exact}),
            "fig2b_principal": self._frame(lambdas, {
                **{f"N{N}": v for N, v in self._curves(series, chain, lambdas).items()}, "exact": exact}),
        }
        summary.update(scan=records, principal=principal, verdict=verdict, diagnostics=diagnostics)
        return SectionOutcome(SectionResult(section="sec32", measurements=m, summary=summary), curves)

    def _principal_value(self) -> SectionOutcome:
        series = builtin_series(BuiltinModelId.PV_MODEL, 6)
        records = self._scan(series, range(1, 6), 1.0)
        principal = select_principal(records, SelectionRule.PRINCIPAL_MIN)
        m: Dict[str, float] = {}
        self._sequence_measurements(principal, "p", (2, 3, 4, 5), m)

        splits = {lam: pv_split(lam) for lam in (5.0, 10.0)}
        for lam, split in splits.items():
            m[f"s_exact_{int(lam)}"] = split.s_exact
            m[f"s_np_{int(lam)}"] = split.s_np
        found = principal.by_order()
        if 5 in found:
            for lam, split in splits.items():
                m[f"S5_minus_snp_{int(lam)}"] = self.engine.evaluate(series, 5, lam, found[5].p_star).value - split.s_np

        lambdas = self._grid(BuiltinModelId.PV_MODEL)
        grid_splits = [pv_split(float(lam)) for lam in lambdas]
        m["pv_identity_residual"] = max(split.identity_residual for split in list(splits.values()) + grid_splits)

        verdict = self._verdict(series, principal, 1.0)
        diagnostics = self._diagnostics(series, principal, 1.0, verdict)
        m["magic_sign_matches"] = _flag(bool(diagnostics.magic_sign_matches))
        curves = {"fig3_principal": self._frame(lambdas, {
            **{f"N{N}": v for N, v in self._curves(series, principal, lambdas).items()},
            "s_pert": np.array([s.s_pert for s in grid_splits]),
            "s_exact": np.array([s.s_exact for s in grid_splits]),
        })}
        summary = dict(scan=records, principal=principal, verdict=verdict, diagnostics=diagnostics,
                       pv_split={str(lam): split for lam, split in splits.items()})
        return SectionOutcome(SectionResult(section="sec33", measurements=m, summary=summary), curves)

    def _euler_heisenberg(self) -> SectionOutcome:
        model = BUILTIN_MODELS[BuiltinModelId.EULER_HEISENBERG]
        series = builtin_series(BuiltinModelId.EULER_HEISENBERG, 7)
        lambda0 = model.default_lambda0
        records = self._scan(series, range(1, 8), lambda0)
        principal = select_principal(records, SelectionRule.PRINCIPAL_MIN)
        chain = principal.restricted_to((ExtremumKind.GLOBAL_MIN,))
        globals_ = chain.found()

        m: Dict[str, float] = {"global_min_count": float(len(globals_))}
        for rank, record in enumerate(globals_, start=1):
            m[f"p_global_{rank}"] = record.p_star
            m[f"S_global_{rank}"] = record.S_value
        m["exact_lambda_10"] = exact_sum(BuiltinModelId.EULER_HEISENBERG, lambda0)

        verdict = self._verdict(series, chain, lambda0)
        m["verdict_upper_bound"] = _flag(verdict.direction is BoundDirection.UPPER_BOUND)
        diagnostics = self._diagnostics(series, chain, lambda0, verdict)

        lambdas = self._grid(BuiltinModelId.EULER_HEISENBERG)
        exact = np.array([exact_sum(BuiltinModelId.EULER_HEISENBERG, float(lam)) for lam in lambdas])
        curves = {"fig4_global_minima": self._frame(lambdas, {
            **{f"N{N}": v for N, v in self._curves(series, chain, lambdas).items()}, "exact": exact})}
        summary = dict(scan=records, principal=principal, global_chain=chain, verdict=verdict,
                       diagnostics=diagnostics,
                       magic_mismatch_reported=diagnostics.magic_sign_matches is False)
        return SectionOutcome(SectionResult(section="sec34", measurements=m, summary=summary), curves)

    def _beta_function(self) -> SectionOutcome:
        series = builtin_series(BuiltinModelId.BETA_POLYMER, 7)
        aux = auxiliary_series(series)
        records = self._scan(series, range(1, 8), 1.0)
        aux_records = self._scan(aux, range(1, aux.order + 1), 1.0)
        principal = select_principal(records, SelectionRule.PRINCIPAL_MIN)
        bar = select_principal(records, SelectionRule.BAR_BRANCH)
        aux_principal = select_principal(aux_records, SelectionRule.PRINCIPAL_MAX)

        m: Dict[str, float] = {}
        self._sequence_measurements(principal, "p", range(2, 8), m)
        self._sequence_measurements(bar, "pbar", (3, 5, 7), m)
        self._sequence_measurements(aux_principal, "paux", range(2, 7), m)
        aux_found = aux_principal.by_order()
        if 5 in aux_found:
            m["paux_5_inflexion"] = _flag(aux_found[5].kind is ExtremumKind.INFLEXION)

        summary: Dict[str, object] = {"literature": LITERATURE_FIXED_POINT}
        if 6 in aux_found:
            reconstructed = ResummedCurve(aux, 6, aux_found[6].p_star, self.engine, reconstruct=True)
            try:
                zero = zero_and_slope(reconstructed, BETA_ZERO_BRACKET)
                m["lambda_star"] = zero.lambda_star
                m["omega"] = zero.omega
                summary["reconstructed_zero"] = zero
            except NoZeroInBracketError as e:
                summary["reconstructed_zero"] = str(e)
        bar_found = bar.by_order()
        if 7 in bar_found:
            try:
                zero = zero_and_slope(ResummedCurve(series, 7, bar_found[7].p_star, self.engine), BETA_ZERO_BRACKET)
                m["bar_zero_7"] = zero.lambda_star
                summary["bar_zero"] = zero
            except NoZeroInBracketError as e:
                summary["bar_zero"] = str(e)

        lambdas = self._grid(BuiltinModelId.BETA_POLYMER)
        verdict = self._verdict(series, principal, 1.0)
        bar_verdict = self._verdict(series, bar, 1.0)
        aux_verdict = self._verdict(aux, aux_principal, 1.0, reconstruct=True)
        diagnostics = self._diagnostics(series, principal, 1.0, verdict)
        checks = {
            "principal": slope_checks(series, principal, lambdas, self.engine),
            "bar": slope_checks(series, bar, lambdas, self.engine),
            "reconstructed": slope_checks(aux, aux_principal, lambdas, self.engine, reconstruct=True),
        }
        zoom = np.linspace(1.35, 1.5, self.config.reproduce.curve_points)
        curves = {
            "fig5a_principal": self._frame(lambdas, {f"N{N}": v for N, v in self._curves(series, principal, lambdas).items()}),
            "fig5b_bar_branch": self._frame(lambdas, {f"N{N}": v for N, v in self._curves(series, bar, lambdas).items()}),
            "fig5c_reconstructed": self._frame(lambdas, {
                f"N{N}": v for N, v in self._curves(aux, aux_principal, lambdas, reconstruct=True).items()}),
        }
        if 6 in aux_found:
            curves["fig5d_reconstructed_zoom"] = self._frame(zoom, {
                "N6": ResummedCurve(aux, 6, aux_found[6].p_star, self.engine, reconstruct=True).values(zoom)})
        summary.update(scan=records, auxiliary_scan=aux_records, principal=principal, bar_branch=bar,
                       auxiliary_principal=aux_principal, verdict=verdict, bar_verdict=bar_verdict,
                       auxiliary_verdict=aux_verdict, diagnostics=diagnostics, slope_checks=checks)
        return SectionOutcome(SectionResult(section="sec35", measurements=m, summary=summary), curves)
