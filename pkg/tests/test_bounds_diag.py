import math

import numpy as np
import pytest

from src.core.bounds_diag import (
    CAVEAT_LOCAL_EXTREMA, ResummedCurve, alpha_coefficient, appendix_diagnostics, bound_verdict, cn_sequence,
    fit_k, grid_curves, lambda_grid, recursion_residuals, slope_checks,
)
from src.core.extremum_scan import scan_all, select_principal
from src.core.series_core import auxiliary_series
from src.models.report_models import BoundBasis, BoundDirection
from src.models.resum_models import (
    ExtremumKind, ExtremumRecord, ExtremumSequence, ScanConfig, SelectionRule, SequenceEntry,
)


def _sequence(values, kinds, rule=SelectionRule.PRINCIPAL_MIN, p_values=None):
    p_values = p_values or [float(i + 1) for i in range(len(values))]
    entries = [
        SequenceEntry(N=N, record=ExtremumRecord(N=N, p_star=p, S_value=S, kind=kind, curvature_sign=1,
                                                 second_difference=1.0, derivative_residual=0.0))
        for N, (S, kind, p) in enumerate(zip(values, kinds, p_values), start=2)
    ]
    return ExtremumSequence(entries=entries, selection_rule=rule)


G, L = ExtremumKind.GLOBAL_MIN, ExtremumKind.LOCAL_MIN


@pytest.fixture(scope="module")
def prototype_chain(prototype, engine):
    records = scan_all(prototype, [2, 3, 4], ScanConfig(lambda0=1.0), engine)
    return select_principal(records, SelectionRule.PRINCIPAL_MIN)


# --- Bound verdicts ---
def test_increasing_chain_with_global_minima_is_lower_bound():
    verdict = bound_verdict(_sequence([0.704, 0.709, 0.711], [G, L, G]))
    assert verdict.direction is BoundDirection.LOWER_BOUND
    assert verdict.monotone
    assert verdict.basis is BoundBasis.GLOBAL_MINIMA_CHAIN


def test_decreasing_minima_chain_is_upper_bound_with_caveat():
    verdict = bound_verdict(_sequence([-5.9, -6.9, -7.3], [G, G, G]))
    assert verdict.direction is BoundDirection.UPPER_BOUND
    assert any("not a priori guaranteed" in caveat for caveat in verdict.caveats)


@pytest.mark.parametrize("values, reason", [([], "no extrema"), ([0.7], "single order")])
def test_too_few_orders_is_inconclusive(values, reason):
    verdict = bound_verdict(_sequence(values, [G] * len(values)))
    assert verdict.direction is BoundDirection.INCONCLUSIVE
    assert verdict.reason == reason


def test_constant_chain_is_monotone_but_inconclusive():
    verdict = bound_verdict(_sequence([0.5, 0.5, 0.5], [G, G, G]))
    assert verdict.direction is BoundDirection.INCONCLUSIVE
    assert verdict.monotone


def test_non_monotone_chain_is_inconclusive():
    verdict = bound_verdict(_sequence([0.70, 0.72, 0.71], [G, G, G]))
    assert verdict.direction is BoundDirection.INCONCLUSIVE
    assert not verdict.monotone


def test_increasing_local_minima_do_not_claim_a_bound():
    verdict = bound_verdict(_sequence([0.1, 0.2, 0.3], [L, L, L]))
    assert verdict.direction is BoundDirection.INCONCLUSIVE
    assert verdict.monotone


def test_maxima_chain_carries_local_extrema_caveat():
    M = ExtremumKind.LOCAL_MAX
    verdict = bound_verdict(_sequence([0.1, 0.2, 0.3], [M, M, M], rule=SelectionRule.PRINCIPAL_MAX))
    assert verdict.direction is BoundDirection.LOWER_BOUND
    assert CAVEAT_LOCAL_EXTREMA in verdict.caveats


def test_trend_must_hold_on_the_lambda_grid():
    sequence = _sequence([0.704, 0.709, 0.711], [G, L, G])
    crossing = {2: np.array([0.9, 0.8]), 3: np.array([0.95, 0.7]), 4: np.array([0.97, 0.75])}
    verdict = bound_verdict(sequence, crossing)
    assert verdict.direction is BoundDirection.INCONCLUSIVE
    assert verdict.reason == "trend not uniform in λ"


# --- c(N) ---
def test_recursion_residual_vanishes_on_exact_recursion():
    assert recursion_residuals([2.0, 4.0 / 3.0]) == pytest.approx([0.0], abs=1e-15)


def test_fit_k_recovers_asymptotic_offset():
    orders = [2, 3, 4, 5]
    ratios = [1.0 / (1.0 - 1.0 / (N + 0.7)) for N in orders]
    assert fit_k(orders, ratios) == pytest.approx(0.7, abs=1e-6)
    assert fit_k(orders[:2], ratios[:2]) == pytest.approx(0.7, abs=1e-12)


def test_fit_k_needs_ratios_above_one():
    assert fit_k([2, 3], [1.5, 0.9]) is None


def test_cn_sequence_from_quoted_positions():
    sequence = _sequence([0.704, 0.709, 0.711], [G, L, G], p_values=[2.65, 5.1, 8.4])
    cn = cn_sequence(sequence.found())
    assert cn.orders == [2, 3]
    assert cn.values == pytest.approx([5.1 / 2.65, 8.4 / 5.1])
    assert cn.strictly_decreasing
    assert all(c > 1 for c in cn.values)


# --- Curves ---
def test_lambda_grid_excludes_origin():
    grid = lambda_grid(2.0, 4)
    assert grid.tolist() == [0.5, 1.0, 1.5, 2.0]


def test_resummed_curve_slope_matches_differences(prototype, engine):
    curve = ResummedCurve(prototype, 3, 2.0, engine)
    h = 1e-5
    numerical = (curve(0.5 + h) - curve(0.5 - h)) / (2.0 * h)
    assert curve.slope(0.5) == pytest.approx(numerical, rel=1e-5)
    assert curve.origin_value == 1.0
    assert curve.origin_slope == -1.0


def test_reconstructed_curve_multiplies_by_lambda(beta, engine):
    aux = auxiliary_series(beta)
    reconstructed = ResummedCurve(aux, 4, 0.5, engine)
    assert reconstructed.reconstruct
    plain = engine.evaluate(aux, 4, 1.2, 0.5).value
    assert reconstructed(1.2) == pytest.approx(1.2 * plain, rel=1e-14)
    assert reconstructed.origin_value == 0.0
    assert reconstructed.origin_slope == beta.coefficients[1]
    h = 1e-5
    numerical = (reconstructed(1.2 + h) - reconstructed(1.2 - h)) / (2.0 * h)
    assert reconstructed.slope(1.2) == pytest.approx(numerical, rel=1e-5)


def test_alpha_matches_direct_difference(prototype, engine):
    alpha, error = alpha_coefficient(prototype, 3, 1.0, 5.0, engine)
    h = 1e-4
    a1 = lambda lam: engine.terms(prototype, 3, lam, 5.0)[1]
    direct = a1(1.0) - (a1(math.exp(h)) - a1(math.exp(-h))) / (2.0 * h)
    assert alpha == pytest.approx(direct, rel=1e-6)
    assert error >= 0.0


# --- Diagnostics on a real chain ---
def test_prototype_chain_diagnostics(prototype, engine, prototype_chain):
    report = appendix_diagnostics(prototype, prototype_chain, 1.0, engine)
    assert not report.partial
    assert report.cn.values == pytest.approx([5.1 / 2.65, 8.4 / 5.1], rel=0.1)
    assert report.cn.strictly_decreasing
    assert report.cn.K_fit is not None
    assert len(report.delta_S) == 2
    assert set(report.alpha_by_order) == {2, 3, 4}
    failed = [check for check in report.identity_checks if not check.passed]
    assert failed == []
    assert report.lambda_grid[0] == 0.0


def test_prototype_chain_is_a_lower_bound_on_the_grid(prototype, engine, prototype_chain):
    curves = grid_curves(prototype, prototype_chain, lambda_grid(1.0, 20), engine)
    verdict = bound_verdict(prototype_chain, curves)
    assert verdict.direction is BoundDirection.LOWER_BOUND


def test_prototype_slopes_stay_negative(prototype, engine, prototype_chain):
    checks = slope_checks(prototype, prototype_chain, lambda_grid(1.0, 20), engine)
    assert len(checks) == 3
    for check in checks:
        assert check.slope_sign_constant
        assert check.sign_changes == []
        assert check.expected_origin_slope == -1.0
        assert check.origin_slope == pytest.approx(-1.0, rel=1e-3)


def test_identity_checks_hold_plain_booleans(prototype, engine, prototype_chain):
    report = appendix_diagnostics(prototype, prototype_chain, 1.0, engine)
    assert all(type(check.passed) is bool for check in report.identity_checks)
    assert '"passed":true' in report.identity_checks[0].model_dump_json()
