import math

import numpy as np
import pytest

from src.core.errors import AmbiguousSelectionError, NoFixedPointError, SeriesOrderError
from src.core.extremum_scan import (
    _merge_close_pairs, aitken_limit, detect_fixed_point, log_grid, scan_all, scan_extrema, select_principal,
)
from src.models.resum_models import ExtremumKind, ExtremumRecord, ScanConfig, SelectionRule
from src.models.series_models import CoefficientSeries


def _record(N, p, S, kind):
    sign = 1 if kind.is_min else -1 if kind.is_max else 0
    return ExtremumRecord(N=N, p_star=p, S_value=S, kind=kind, curvature_sign=sign, second_difference=float(sign),
                          derivative_residual=0.0)


class _FlatProfile:
    def both(self, t):
        return 0.5, 0.0


# --- Grid and scan ---
def test_log_grid_spans_window():
    grid = log_grid(ScanConfig(p_min=0.01, p_max=1000.0, grid_points_per_decade=60))
    assert len(grid) == 301
    assert grid[0] == pytest.approx(math.log(0.01))
    assert grid[-1] == pytest.approx(math.log(1000.0))


def test_scan_requires_positive_order(prototype, scan_config, engine):
    with pytest.raises(SeriesOrderError):
        scan_extrema(prototype, 0, scan_config, engine)


def test_prototype_first_order_has_no_extremum(prototype, scan_config, engine):
    assert scan_extrema(prototype, 1, scan_config, engine) == []


def test_prototype_second_order_global_minimum(prototype, scan_config, engine):
    records = scan_extrema(prototype, 2, scan_config, engine)
    globals_ = [r for r in records if r.kind is ExtremumKind.GLOBAL_MIN]
    assert len(globals_) == 1
    assert globals_[0].p_star == pytest.approx(2.65, rel=0.05)
    assert globals_[0].derivative_residual < 1e-6


def test_geometric_second_order_minimum(geometric, scan_config, engine):
    records = scan_extrema(geometric, 2, scan_config, engine)
    minima = [r for r in records if r.kind.is_min]
    assert len(minima) == 1
    assert minima[0].p_star == pytest.approx(4.0 / 3.0, rel=1e-4)


def test_window_flags_are_plain_booleans(prototype, scan_config, engine):
    for record in scan_extrema(prototype, 3, scan_config, engine):
        assert type(record.window_flags.touches_p_min) is bool
        assert type(record.window_flags.touches_p_max) is bool
        record.model_dump_json()


def test_second_order_minimum_ignores_constant_term(scan_config, engine):
    series = CoefficientSeries(name="shifted", coefficients=(0.0, -1.0, 1.0))
    minima = [r for r in scan_extrema(series, 2, scan_config, engine) if r.kind.is_min]
    assert len(minima) == 1
    assert minima[0].p_star == pytest.approx(4.0 / 3.0, rel=1e-4)


def test_scan_records_are_stationary_and_sorted(prototype, scan_config, engine):
    records = scan_extrema(prototype, 3, scan_config, engine)
    assert [r.p_star for r in records] == sorted(r.p_star for r in records)
    for record in (r for r in records if r.kind is not ExtremumKind.INFLEXION):
        _, p_slope, _ = engine.log_derivatives(prototype, 3, 1.0, record.p_star)
        assert abs(p_slope) <= 1e-6 * max(1.0, abs(record.S_value))


def test_scan_all_covers_requested_orders(prototype, scan_config, engine):
    records = scan_all(prototype, [1, 2], scan_config, engine)
    assert sorted(records) == [1, 2]


# --- Selection ---
def test_principal_min_prefers_global_minimum():
    records = {
        2: [_record(2, 0.5, 0.60, ExtremumKind.LOCAL_MIN), _record(2, 2.6, 0.55, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 0.4, 0.70, ExtremumKind.LOCAL_MIN), _record(3, 5.0, 0.71, ExtremumKind.LOCAL_MIN)],
    }
    sequence = select_principal(records, SelectionRule.PRINCIPAL_MIN)
    chosen = sequence.by_order()
    assert chosen[2].p_star == 2.6
    # no global minimum at N=3: the one nearest p(2) in log p
    assert chosen[3].p_star == 5.0


def test_principal_min_notes_missing_orders():
    records = {1: [], 2: [_record(2, 2.6, 0.55, ExtremumKind.GLOBAL_MIN)]}
    sequence = select_principal(records)
    assert sequence.entries[0].record is None
    assert sequence.entries[0].note == "no solution"


def test_principal_max_falls_back_to_inflexion():
    records = {5: [_record(5, 0.4, 1.0, ExtremumKind.INFLEXION), _record(5, 3.0, 0.2, ExtremumKind.LOCAL_MIN)]}
    sequence = select_principal(records, SelectionRule.PRINCIPAL_MAX)
    assert sequence.by_order()[5].kind is ExtremumKind.INFLEXION


def test_tied_candidates_are_ambiguous():
    records = {2: [_record(2, 1.0, 0.5, ExtremumKind.GLOBAL_MIN), _record(2, 4.0, 0.5, ExtremumKind.GLOBAL_MIN)]}
    with pytest.raises(AmbiguousSelectionError) as excinfo:
        select_principal(records)
    assert len(excinfo.value.candidates) == 2


def test_bar_branch_takes_maximum_below_local_minimum():
    records = {
        2: [_record(2, 1.3, 0.5, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 0.05, 0.8, ExtremumKind.LOCAL_MAX), _record(3, 0.18, 0.7, ExtremumKind.LOCAL_MAX),
            _record(3, 3.2, 0.6, ExtremumKind.LOCAL_MIN), _record(3, 9.0, 0.7, ExtremumKind.LOCAL_MAX)],
    }
    sequence = select_principal(records, SelectionRule.BAR_BRANCH)
    assert sequence.by_order()[3].p_star == 0.18
    assert 2 not in sequence.by_order()


def test_bar_branch_accompanies_global_minimum_too():
    records = {
        3: [_record(3, 0.1863, -0.40, ExtremumKind.LOCAL_MAX), _record(3, 3.2, -0.563, ExtremumKind.GLOBAL_MIN)],
        5: [_record(5, 0.2091, -0.45, ExtremumKind.LOCAL_MAX), _record(5, 8.6, -0.549, ExtremumKind.GLOBAL_MIN)],
    }
    chosen = select_principal(records, SelectionRule.BAR_BRANCH).by_order()
    assert chosen[3].p_star == 0.1863
    assert chosen[5].p_star == 0.2091


# --- Fixed point ---
def test_aitken_limit_of_quoted_branch():
    assert aitken_limit([1.6, 1.3, 1.15]) == pytest.approx(1.0, abs=1e-12)


def test_aitken_limit_short_sequence():
    assert aitken_limit([2.0, 1.5]) == 1.5


def test_fixed_point_prefers_alternating_shrinking_chain():
    records = {
        2: [_record(2, 2.65, 0.70, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 1.6, 0.73, ExtremumKind.LOCAL_MAX), _record(3, 5.1, 0.71, ExtremumKind.LOCAL_MIN)],
        4: [_record(4, 1.3, 0.72, ExtremumKind.LOCAL_MIN), _record(4, 8.4, 0.71, ExtremumKind.GLOBAL_MIN)],
        5: [_record(5, 1.15, 0.723, ExtremumKind.LOCAL_MAX)],
    }
    candidate = detect_fixed_point(records)
    assert candidate.orders == [3, 4, 5]
    assert candidate.p_values == [1.6, 1.3, 1.15]
    assert candidate.alternation
    assert candidate.limit_estimate == pytest.approx(1.0, abs=1e-9)
    assert candidate.singularity_estimate == pytest.approx(-1.0, abs=1e-9)


def test_fixed_point_needs_three_orders_in_window():
    records = {3: [_record(3, 1.6, 0.7, ExtremumKind.LOCAL_MAX)], 4: [_record(4, 1.3, 0.7, ExtremumKind.LOCAL_MIN)]}
    with pytest.raises(NoFixedPointError):
        detect_fixed_point(records)


def test_fixed_point_ignores_principal_chain():
    # entire Borel function: the only shrinking chain runs through the principal p(3)
    records = {
        2: [_record(2, 1.333, 0.49, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 2.8685, 0.50, ExtremumKind.LOCAL_MIN)],
        4: [_record(4, 0.8385, 0.52, ExtremumKind.LOCAL_MAX), _record(4, 5.0, 0.51, ExtremumKind.GLOBAL_MIN)],
        5: [_record(5, 0.422, 0.50, ExtremumKind.LOCAL_MIN), _record(5, 7.2, 0.52, ExtremumKind.LOCAL_MAX)],
    }
    with pytest.raises(NoFixedPointError):
        detect_fixed_point(records)


def test_short_chain_without_alternation_is_rejected():
    records = {
        2: [_record(2, 9.0, 0.40, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 2.0, 0.50, ExtremumKind.LOCAL_MAX)],
        4: [_record(4, 1.5, 0.52, ExtremumKind.LOCAL_MAX)],
        5: [_record(5, 1.3, 0.53, ExtremumKind.LOCAL_MAX)],
    }
    with pytest.raises(NoFixedPointError):
        detect_fixed_point(records)


def test_long_chain_without_alternation_is_accepted():
    records = {
        2: [_record(2, 9.0, 0.40, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 2.0, 0.50, ExtremumKind.LOCAL_MAX)],
        4: [_record(4, 1.5, 0.52, ExtremumKind.LOCAL_MAX)],
        5: [_record(5, 1.3, 0.53, ExtremumKind.LOCAL_MAX)],
        6: [_record(6, 1.2, 0.535, ExtremumKind.LOCAL_MAX)],
    }
    candidate = detect_fixed_point(records)
    assert candidate.orders == [3, 4, 5, 6]
    assert not candidate.alternation


def test_fixed_point_branch_sequence():
    records = {
        2: [_record(2, 2.65, 0.70, ExtremumKind.GLOBAL_MIN)],
        3: [_record(3, 1.6, 0.73, ExtremumKind.LOCAL_MAX), _record(3, 5.1, 0.71, ExtremumKind.LOCAL_MIN)],
        4: [_record(4, 1.3, 0.72, ExtremumKind.LOCAL_MIN), _record(4, 8.4, 0.71, ExtremumKind.GLOBAL_MIN)],
        5: [_record(5, 1.15, 0.723, ExtremumKind.LOCAL_MAX)],
    }
    sequence = select_principal(records, SelectionRule.FIXED_POINT_BRANCH)
    assert [r.p_star for r in sequence.found()] == [1.6, 1.3, 1.15]


# --- Near-double roots ---
GRID = np.array([math.log(0.01) + i * 0.04 for i in range(400)])


def test_close_max_min_pair_merges_into_inflexion():
    records = [_record(5, 0.40, 0.9, ExtremumKind.LOCAL_MAX), _record(5, 0.41, 0.9, ExtremumKind.LOCAL_MIN)]
    merged = _merge_close_pairs(records, _FlatProfile(), GRID, np.zeros_like(GRID))
    assert len(merged) == 1
    assert merged[0].kind is ExtremumKind.INFLEXION
    assert 0.40 < merged[0].p_star < 0.41


def test_shallow_pair_merges_relative_to_decade_variation():
    values = -0.5 - 0.1 * GRID
    records = [_record(5, 0.360544, -0.60, ExtremumKind.LOCAL_MIN),
               _record(5, 0.398034, -0.60 + 1e-6, ExtremumKind.LOCAL_MAX)]
    merged = _merge_close_pairs(records, _FlatProfile(), GRID, values)
    assert [r.kind for r in merged] == [ExtremumKind.INFLEXION]
    assert merged[0].p_star == pytest.approx(math.sqrt(0.360544 * 0.398034), rel=1e-12)


def test_deep_pair_at_same_spacing_is_kept():
    values = -0.5 - 0.1 * GRID
    records = [_record(5, 0.360544, -0.60, ExtremumKind.LOCAL_MIN),
               _record(5, 0.398034, -0.50, ExtremumKind.LOCAL_MAX)]
    assert len(_merge_close_pairs(records, _FlatProfile(), GRID, values)) == 2


def test_distant_pair_is_kept():
    records = [_record(5, 0.4, 0.9, ExtremumKind.LOCAL_MAX), _record(5, 0.8, 0.8, ExtremumKind.LOCAL_MIN)]
    assert len(_merge_close_pairs(records, _FlatProfile(), GRID, np.zeros_like(GRID))) == 2
