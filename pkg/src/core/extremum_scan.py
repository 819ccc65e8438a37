# src/core/extremum_scan.py
"""
Solves ∂S_N(λ₀,p)/∂p = 0 over p > 0, classifies the solutions and assembles
the per-order chains p(N), p̄(N), p'(N) and the fixed-point branch p₀(N).

The sweep runs on a log-uniform grid of the analytic p∂S/∂p; sign changes
are refined with Brent's method in log p. Touch points (|p∂S/∂p| dipping to
zero without a sign change) are refined with a bounded scalar minimisation
and reported as inflexions. A max/min pair that is very close in log p, or
shallow against the variation of S over the surrounding decade, is merged
into one inflexion.
"""

import itertools
import math
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import brentq, minimize_scalar
from tqdm import tqdm

from src.core.errors import AmbiguousSelectionError, NoFixedPointError, SeriesOrderError
from src.core.resum_engine import ResumEngine, get_engine
from src.models.resum_models import (
    ExtremumKind, ExtremumRecord, ExtremumSequence, FixedPointCandidate, ScanConfig, SelectionRule,
    SequenceEntry, WindowFlags,
)
from src.models.series_models import CoefficientSeries

TOUCH_FRACTION = 0.05
NEIGHBOUR_CELLS = 5
MERGE_LOG_WIDTH = 0.05
MERGE_MAX_LOG_WIDTH = 0.5
MERGE_DEPTH_RATIO = 2e-3
MIN_PLAIN_CHAIN = 4
GLOBAL_RTOL = 1e-10
DEFAULT_FIXED_POINT_WINDOW = (0.3, 3.0)

RecordsByOrder = Mapping[int, List[ExtremumRecord]]


def log_grid(config: ScanConfig) -> np.ndarray:
    decades = math.log10(config.p_max / config.p_min)
    count = max(int(round(decades * config.grid_points_per_decade)) + 1, 3)
    return np.linspace(math.log(config.p_min), math.log(config.p_max), count)


class _Profile:
    """S and p∂S/∂p of one (series, N) at λ₀, as functions of t = ln p."""

    def __init__(self, engine: ResumEngine, series: CoefficientSeries, N: int, lam: float):
        self.engine, self.series, self.N, self.lam = engine, series, N, lam

    def both(self, t: float) -> Tuple[float, float]:
        value, p_slope, _ = self.engine.log_derivatives(self.series, self.N, self.lam, math.exp(t))
        return value, p_slope

    def slope(self, t: float) -> float:
        return self.both(t)[1]

    def value(self, t: float) -> float:
        return self.both(t)[0]

    def curvature(self, t: float, delta: float) -> float:
        return (self.slope(t + delta) - self.slope(t - delta)) / (2.0 * delta)


def _window_flags(t_star: float, grid: np.ndarray) -> WindowFlags:
    cell = grid[1] - grid[0]
    return WindowFlags(touches_p_min=bool(t_star - grid[0] <= cell), touches_p_max=bool(grid[-1] - t_star <= cell))


def _classify(curvature_sign: int, value: float, grid_values: np.ndarray, asymptote: float) -> ExtremumKind:
    tol = GLOBAL_RTOL * max(1.0, abs(value))
    if curvature_sign > 0:
        is_global = value <= grid_values.min() + tol and value <= asymptote + tol
        return ExtremumKind.GLOBAL_MIN if is_global else ExtremumKind.LOCAL_MIN
    is_global = value >= grid_values.max() - tol and value >= asymptote - tol
    return ExtremumKind.GLOBAL_MAX if is_global else ExtremumKind.LOCAL_MAX


def scan_extrema(series: CoefficientSeries, N: int, config: ScanConfig,
                 engine: Optional[ResumEngine] = None) -> List[ExtremumRecord]:
    """All stationary points of S_N(λ₀, p) in the scan window, sorted by p."""
    if N < 1:
        raise SeriesOrderError("the extremum condition needs N >= 1")
    if N > series.order:
        raise SeriesOrderError(f"N={N} outside 0..{series.order} for '{series.name}'")
    engine = engine or get_engine(config.quad)
    profile = _Profile(engine, series, N, config.lambda0)
    grid = log_grid(config)
    cell = grid[1] - grid[0]
    delta = cell / 8.0
    asymptote = series.prefactor * series.coefficients[0]

    samples = np.array([profile.both(t) for t in grid])
    values, slopes = samples[:, 0], samples[:, 1]
    signs = np.where(slopes >= 0.0, 1, -1)

    found: List[Tuple[float, int]] = []
    for i in np.nonzero(signs[:-1] != signs[1:])[0]:
        t_star = brentq(profile.slope, grid[i], grid[i + 1], xtol=config.refine_tol * 1e-3)
        found.append((t_star, 1 if signs[i] < 0 else -1))

    records: List[ExtremumRecord] = []
    for t_star, curvature_sign in found:
        value, slope = profile.both(t_star)
        curvature = profile.curvature(t_star, delta)
        kind = _classify(curvature_sign, value, values, asymptote)
        neighbours = _neighbour_curvature(profile, grid, t_star, delta)
        if abs(curvature) <= config.inflexion_ratio * neighbours:
            kind = ExtremumKind.INFLEXION
        records.append(ExtremumRecord(
            N=N, p_star=math.exp(t_star), S_value=value, kind=kind, curvature_sign=curvature_sign,
            second_difference=curvature, derivative_residual=abs(slope), window_flags=_window_flags(t_star, grid),
        ))

    records = _merge_close_pairs(records, profile, grid, values)
    records.extend(_touch_points(profile, grid, values, slopes, signs, config, N))
    records.sort(key=lambda record: record.p_star)
    logger.info("Scanned '{}' N={} at λ₀={}: {} stationary point(s) {}", series.name, N, config.lambda0,
                len(records), [(round(r.p_star, 4), r.kind.value) for r in records])
    return records


def _neighbour_curvature(profile: _Profile, grid: np.ndarray, t_star: float, delta: float) -> float:
    cell = grid[1] - grid[0]
    offsets = (-2.0 * cell, 2.0 * cell)
    return max(abs(profile.curvature(t_star + offset, delta)) for offset in offsets)


def _is_degenerate_pair(first: ExtremumRecord, second: ExtremumRecord, grid: np.ndarray,
                        values: np.ndarray) -> bool:
    """
    True for an adjacent max/min pair that is really one flattened inflexion:
    either closer than MERGE_LOG_WIDTH in ln p, or (within MERGE_MAX_LOG_WIDTH)
    with |ΔS| between them below MERGE_DEPTH_RATIO of the variation of S over
    the decade centred on the pair.
    """
    if first.curvature_sign * second.curvature_sign >= 0:
        return False
    gap = math.log(second.p_star) - math.log(first.p_star)
    if gap <= MERGE_LOG_WIDTH:
        return True
    if gap > MERGE_MAX_LOG_WIDTH:
        return False
    t_mid = 0.5 * (math.log(first.p_star) + math.log(second.p_star))
    grid = np.asarray(grid, dtype=float)
    decade = np.asarray(values, dtype=float)[np.abs(grid - t_mid) <= 0.5 * math.log(10.0)]
    if decade.size < 2:
        return False
    variation = float(np.ptp(decade))
    return variation > 0.0 and abs(second.S_value - first.S_value) <= MERGE_DEPTH_RATIO * variation


def _merge_close_pairs(records: List[ExtremumRecord], profile: _Profile, grid: np.ndarray,
                       values: np.ndarray) -> List[ExtremumRecord]:
    """Degenerate max/min pairs collapse into one inflexion at their midpoint in ln p."""
    records = sorted(records, key=lambda record: record.p_star)
    merged: List[ExtremumRecord] = []
    i = 0
    while i < len(records):
        current = records[i]
        if i + 1 < len(records):
            following = records[i + 1]
            if _is_degenerate_pair(current, following, grid, values):
                t_mid = 0.5 * (math.log(current.p_star) + math.log(following.p_star))
                value, slope = profile.both(t_mid)
                merged.append(ExtremumRecord(
                    N=current.N, p_star=math.exp(t_mid), S_value=value, kind=ExtremumKind.INFLEXION,
                    curvature_sign=0, second_difference=0.5 * (current.second_difference + following.second_difference),
                    derivative_residual=abs(slope), window_flags=_window_flags(t_mid, grid),
                ))
                i += 2
                continue
        merged.append(current)
        i += 1
    return merged


def _touch_points(profile: _Profile, grid: np.ndarray, values: np.ndarray, slopes: np.ndarray,
                  signs: np.ndarray, config: ScanConfig, N: int) -> List[ExtremumRecord]:
    magnitudes = np.abs(slopes)
    records = []
    for i in range(1, len(grid) - 1):
        if not (signs[i - 1] == signs[i] == signs[i + 1]):
            continue
        if magnitudes[i] > magnitudes[i - 1] or magnitudes[i] > magnitudes[i + 1]:
            continue
        window = magnitudes[max(0, i - NEIGHBOUR_CELLS): i + NEIGHBOUR_CELLS + 1]
        scale = float(window.max())
        if scale == 0.0 or magnitudes[i] > TOUCH_FRACTION * scale:
            continue
        sign = float(signs[i])
        result = minimize_scalar(lambda t: sign * profile.slope(t), bounds=(grid[i - 1], grid[i + 1]),
                                 method="bounded", options={"xatol": config.refine_tol * 1e-3})
        if sign * float(result.fun) > config.inflexion_ratio * scale:
            continue
        t_star = float(result.x)
        value, slope = profile.both(t_star)
        records.append(ExtremumRecord(
            N=N, p_star=math.exp(t_star), S_value=value, kind=ExtremumKind.INFLEXION, curvature_sign=0,
            second_difference=profile.curvature(t_star, (grid[1] - grid[0]) / 8.0),
            derivative_residual=abs(slope), window_flags=_window_flags(t_star, grid),
        ))
    return records


def scan_all(series: CoefficientSeries, orders: Iterable[int], config: ScanConfig,
             engine: Optional[ResumEngine] = None, show_progress: bool = False) -> Dict[int, List[ExtremumRecord]]:
    engine = engine or get_engine(config.quad)
    orders = list(orders)
    return {N: scan_extrema(series, N, config, engine)
            for N in tqdm(orders, desc=f"Scanning {series.name}", disable=not show_progress)}


# --- Selection ---
def _log_distance(record: ExtremumRecord, p_reference: float) -> float:
    return abs(math.log(record.p_star) - math.log(p_reference))


def _unique_best(candidates: List[ExtremumRecord], key: Callable[[ExtremumRecord], float], what: str,
                 N: int) -> ExtremumRecord:
    ranked = sorted(candidates, key=key)
    if len(ranked) > 1 and math.isclose(key(ranked[0]), key(ranked[1]), rel_tol=1e-12, abs_tol=1e-14):
        raise AmbiguousSelectionError(f"ambiguous {what} at N={N}", ranked[:2])
    return ranked[0]


def _pick(candidates: List[ExtremumRecord], global_kind: ExtremumKind, previous_p: Optional[float],
          extreme_key: Callable[[ExtremumRecord], float], N: int) -> Optional[ExtremumRecord]:
    if not candidates:
        return None
    globals_ = [record for record in candidates if record.kind is global_kind]
    if globals_:
        return _unique_best(globals_, extreme_key, global_kind.value, N)
    if previous_p is not None:
        return _unique_best(candidates, lambda record: _log_distance(record, previous_p), "nearest extremum", N)
    return _unique_best(candidates, extreme_key, "extremum", N)


def select_principal(records_by_order: RecordsByOrder, rule: SelectionRule = SelectionRule.PRINCIPAL_MIN,
                     fixed_point_window: Tuple[float, float] = DEFAULT_FIXED_POINT_WINDOW) -> ExtremumSequence:
    """Picks one record per order according to `rule`; orders without a candidate carry a note."""
    rule = SelectionRule(rule)
    if rule is SelectionRule.FIXED_POINT_BRANCH:
        return _fixed_point_sequence(records_by_order, fixed_point_window)
    if rule is SelectionRule.BAR_BRANCH:
        return _bar_branch(records_by_order)

    entries: List[SequenceEntry] = []
    previous_p: Optional[float] = None
    for N in sorted(records_by_order):
        records = records_by_order[N]
        if rule is SelectionRule.PRINCIPAL_MIN:
            chosen = _pick([r for r in records if r.kind.is_min], ExtremumKind.GLOBAL_MIN, previous_p,
                           lambda r: r.S_value, N)
        else:
            chosen = _pick([r for r in records if r.kind.is_max], ExtremumKind.GLOBAL_MAX, previous_p,
                           lambda r: -r.S_value, N)
            if chosen is None:
                inflexions = [r for r in records if r.kind is ExtremumKind.INFLEXION]
                if inflexions:
                    reference = previous_p if previous_p is not None else inflexions[0].p_star
                    chosen = _unique_best(inflexions, lambda r: _log_distance(r, reference), "inflexion", N)
        if chosen is None:
            entries.append(SequenceEntry(N=N, note="no solution"))
            continue
        entries.append(SequenceEntry(N=N, record=chosen))
        previous_p = chosen.p_star
    return ExtremumSequence(entries=entries, selection_rule=rule)


def _bar_branch(records_by_order: RecordsByOrder) -> ExtremumSequence:
    """
    The maximum accompanying the principal minimum p(N): nearest in ln p among
    the maxima below it. The minimum may be global or local; only its partner
    maximum matters.
    """
    principal = select_principal(records_by_order, SelectionRule.PRINCIPAL_MIN).by_order()
    entries: List[SequenceEntry] = []
    for N in sorted(records_by_order):
        anchor = principal.get(N)
        if anchor is None or not anchor.kind.is_min:
            entries.append(SequenceEntry(N=N, note="no principal minimum"))
            continue
        maxima = [r for r in records_by_order[N] if r.kind.is_max and r.p_star < anchor.p_star]
        if not maxima:
            entries.append(SequenceEntry(N=N, note="no accompanying local maximum"))
            continue
        chosen = _unique_best(maxima, lambda r: _log_distance(r, anchor.p_star), "accompanying maximum", N)
        entries.append(SequenceEntry(N=N, record=chosen))
    return ExtremumSequence(entries=entries, selection_rule=SelectionRule.BAR_BRANCH)


# --- Fixed-point branch ---
def aitken_limit(values: Sequence[float]) -> float:
    """Aitken Δ² extrapolation of the last three values; falls back to the last value."""
    if len(values) < 3:
        return float(values[-1])
    x0, x1, x2 = values[-3:]
    denominator = x2 - 2.0 * x1 + x0
    if denominator == 0.0:
        return float(x2)
    estimate = x2 - (x2 - x1) ** 2 / denominator
    return float(estimate) if math.isfinite(estimate) and estimate > 0 else float(x2)


def _alternates(kinds: Sequence[ExtremumKind]) -> bool:
    signs = [1 if kind.is_min else -1 if kind.is_max else 0 for kind in kinds]
    return all(a * b < 0 for a, b in zip(signs, signs[1:]))


def _contiguous_runs(orders: List[int]) -> List[List[int]]:
    runs, current = [], []
    for N in orders:
        if current and N != current[-1] + 1:
            runs.append(current)
            current = []
        current.append(N)
    if current:
        runs.append(current)
    return runs


def _principal_keys(records_by_order: RecordsByOrder) -> set:
    try:
        principal = select_principal(records_by_order, SelectionRule.PRINCIPAL_MIN)
    except AmbiguousSelectionError:
        return set()
    return {(record.N, record.p_star) for record in principal.found()}


def detect_fixed_point(records_by_order: RecordsByOrder,
                       window: Tuple[float, float] = DEFAULT_FIXED_POINT_WINDOW,
                       max_gap_ratio: float = 0.9) -> FixedPointCandidate:
    """
    Chooses, across consecutive orders N >= 3, one extremum per order inside
    `window` so that the gaps |ln p₀(N+1) - ln p₀(N)| shrink by at least
    `max_gap_ratio` each step. Records on the principal chain p(N) are not
    candidates. A chain must alternate max/min, or span MIN_PLAIN_CHAIN
    orders when it does not. Alternating chains are preferred, then longer
    chains, then the smallest total variation.
    """
    low, high = window
    principal = _principal_keys(records_by_order)
    candidates = {
        N: [r for r in records if low <= r.p_star <= high and (r.N, r.p_star) not in principal]
        for N, records in records_by_order.items() if N >= 3
    }
    orders = sorted(N for N, records in candidates.items() if records)
    best: Optional[Tuple[tuple, List[ExtremumRecord]]] = None
    for run in _contiguous_runs(orders):
        for length in range(len(run), 2, -1):
            for start in range(len(run) - length + 1):
                span = run[start:start + length]
                for chain in itertools.product(*(candidates[N] for N in span)):
                    gaps = [abs(math.log(b.p_star) - math.log(a.p_star)) for a, b in zip(chain, chain[1:])]
                    if not all(g1 <= max_gap_ratio * g0 for g0, g1 in zip(gaps, gaps[1:])):
                        continue
                    alternating = _alternates([r.kind for r in chain])
                    if not alternating and len(chain) < MIN_PLAIN_CHAIN:
                        continue
                    rank = (alternating, len(chain), -sum(gaps))
                    if best is None or rank > best[0]:
                        best = (rank, list(chain))
    if best is None:
        raise NoFixedPointError(f"no fixed point detected in p-window {window}")

    chain = best[1]
    p_values = [record.p_star for record in chain]
    candidate = FixedPointCandidate(
        orders=[record.N for record in chain], p_values=p_values, kinds=[record.kind for record in chain],
        limit_estimate=aitken_limit(p_values), alternation=best[0][0],
    )
    logger.info("Fixed-point branch {} -> p₀ ≈ {:.4g} (alternating: {})",
                list(zip(candidate.orders, [round(p, 4) for p in p_values])), candidate.limit_estimate,
                candidate.alternation)
    return candidate


def _fixed_point_sequence(records_by_order: RecordsByOrder, window: Tuple[float, float]) -> ExtremumSequence:
    candidate = detect_fixed_point(records_by_order, window)
    chosen = {N: p for N, p in zip(candidate.orders, candidate.p_values)}
    entries = []
    for N in sorted(records_by_order):
        record = next((r for r in records_by_order[N] if N in chosen and r.p_star == chosen[N]), None)
        entries.append(SequenceEntry(N=N, record=record, note=None if record else "not on the fixed-point branch"))
    return ExtremumSequence(entries=entries, selection_rule=SelectionRule.FIXED_POINT_BRANCH)
