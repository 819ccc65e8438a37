import math
import threading
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from src.core.errors import DomainError, SeriesOrderError
from src.core.resum_engine import (
    MomentCache, ResumEngine, conformal_params, conformal_w, conformal_z, expansion_coefficient, resum_eval,
    taylor_consistency, taylor_reconstruction, term_decomposition,
)
from src.core.series_core import builtin_series
from src.models.resum_models import ConformalParams, DerivativeWrt, QuadratureRule, QuadratureSpec
from src.models.series_models import BuiltinModelId, CoefficientSeries


# --- Conformal map ---
def test_conformal_map_fixes_origin_and_sends_infinity_to_one():
    assert conformal_w(0.0, 2.0) == 0.0
    assert conformal_w(np.inf, 2.0) == 1.0


def test_conformal_map_round_trip():
    z = np.array([1e-8, 0.3, 2.0, 7.25, 7.9, 8.1, 150.0, 1e3])
    for p in (0.01, 2.65, 100.0):
        assert np.allclose(conformal_z(conformal_w(z, p), p), z, rtol=1e-13, atol=0)


def test_conformal_map_matches_closed_form():
    z, p = 3.0, 1.5
    s = math.sqrt(1.0 + z * p)
    assert conformal_w(z, p) == pytest.approx((s - 1.0) / (s + 1.0), rel=1e-15)


def test_conformal_map_domain():
    with pytest.raises(DomainError):
        conformal_w(-1.0, 1.0)
    with pytest.raises(DomainError):
        conformal_w(1.0, 0.0)
    with pytest.raises(DomainError):
        conformal_z(1.0, 1.0)


@pytest.mark.parametrize("p", [0.0, -2.0, math.inf, math.nan])
def test_map_parameter_must_be_positive_and_finite(p):
    with pytest.raises(DomainError, match="map parameter"):
        conformal_params(p)
    with pytest.raises(DomainError):
        conformal_w(1.0, p)


def test_map_parameter_model():
    assert conformal_params(2.65) == ConformalParams(p=2.65)


@pytest.mark.parametrize("n, k, expected", [(0, 0, 1), (0, 3, 0), (1, 0, 1), (2, 1, 4), (3, 2, 21)])
def test_expansion_coefficient(n, k, expected):
    assert expansion_coefficient(n, k) == expected


# --- Moments ---
def test_first_moment_matches_independent_quadrature(engine):
    def integrand(z):
        s = math.sqrt(1.0 + z)
        return math.exp(-z) * (s - 1.0) / (s + 1.0)

    reference, _ = quad(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    value = engine.moment(1, 1.0, 1.0)
    assert 0.0 < value < 1.0
    assert value == pytest.approx(reference, abs=1e-10)


def test_moments_decrease_with_order(engine):
    values = engine.moments(8, 1.0, 2.0).values
    assert values[0] == 1.0
    assert np.all(np.diff(values) < 0)


def test_moments_depend_only_on_the_product_lambda_p(engine):
    a = engine.moments(6, 0.5, 4.0).values[:7]
    b = engine.moments(6, 2.0, 1.0).values[:7]
    assert np.allclose(a, b, rtol=1e-11, atol=0)


def test_log_derivative_moments_match_differences(engine):
    q, h = 1.7, 1e-5
    block = engine.moments(4, 1.0, q)
    upper = engine.moments(4, 1.0, q * math.exp(h)).values
    lower = engine.moments(4, 1.0, q * math.exp(-h)).values
    numerical = (upper - lower) / (2.0 * h)
    assert np.allclose(block.log_derivatives[1:5], numerical[1:5], rtol=1e-6)


def test_gauss_laguerre_rule_agrees_at_moderate_q():
    laguerre = ResumEngine(QuadratureSpec(rule=QuadratureRule.GAUSS_LAGUERRE, rel_tol=1e-7, abs_tol=1e-12))
    adaptive = ResumEngine()
    a = laguerre.moments(4, 1.0, 1.0).values
    b = adaptive.moments(4, 1.0, 1.0).values
    assert np.allclose(a[:5], b[:5], rtol=1e-7)


def test_moment_cache_reuses_blocks():
    engine = ResumEngine(cache=MomentCache())
    engine.moment(2, 1.0, 3.0)
    misses = engine.cache.misses
    engine.moment(5, 1.0, 3.0)
    assert engine.cache.misses == misses
    assert engine.cache.hits >= 1
    assert len(engine.cache) == 1


def test_moment_cache_is_safe_under_concurrent_use():
    engine = ResumEngine(cache=MomentCache())
    results = []

    def worker():
        results.append(engine.moment(3, 1.0, 0.7))

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(set(results)) == 1


# --- Resummation ---
def test_order_zero_is_the_constant_term(engine, prototype):
    assert engine.evaluate(prototype, 0, 0.7, 3.0).value == pytest.approx(1.0, abs=1e-15)


def test_prototype_value_at_quoted_extremum(engine, prototype):
    assert engine.evaluate(prototype, 4, 0.5, 8.4).value == pytest.approx(0.711, abs=0.005)


def test_prototype_value_on_fixed_point_branch(engine, prototype):
    assert engine.evaluate(prototype, 5, 0.5, 1.15).value == pytest.approx(0.7228, abs=0.001)


def test_geometric_value_at_quoted_extremum(geometric):
    assert resum_eval(geometric, 4, 0.8, 5.0).value == pytest.approx(0.512, abs=0.005)


def test_decomposition_recombines(engine, prototype):
    evaluation = engine.evaluate(prototype, 5, 0.5, 2.0)
    assert len(evaluation.terms) == 6
    assert evaluation.recombined() == pytest.approx(evaluation.value, rel=1e-12)
    assert term_decomposition(prototype, 5, 0.5, 2.0) == pytest.approx(evaluation.terms, rel=1e-12)


def test_prefactor_scales_linearly(engine):
    base = CoefficientSeries(name="a", coefficients=(1.0, -1.0, 2.0))
    scaled = CoefficientSeries(name="b", coefficients=(1.0, -1.0, 2.0), prefactor=-3.0)
    assert engine.evaluate(scaled, 2, 0.4, 1.3).value == pytest.approx(
        -3.0 * engine.evaluate(base, 2, 0.4, 1.3).value, rel=1e-14)


def test_evaluate_rejects_bad_inputs(engine, prototype):
    with pytest.raises(SeriesOrderError):
        engine.evaluate(prototype, 9, 0.5, 1.0)
    with pytest.raises(DomainError):
        engine.evaluate(prototype, 2, 0.5, -1.0)
    with pytest.raises(DomainError):
        engine.evaluate(prototype, 2, 0.0, 1.0)


# --- Derivatives ---
def test_analytic_slopes_agree_with_finite_differences(engine, prototype):
    value, p_slope, lambda_slope = engine.log_derivatives(prototype, 3, 1.0, 2.0)
    by_p = engine.derivative(prototype, 3, 1.0, 2.0, DerivativeWrt.P)
    by_lambda = engine.derivative(prototype, 3, 1.0, 2.0, DerivativeWrt.LAMBDA)
    assert by_p.log_value == pytest.approx(p_slope, rel=1e-5, abs=1e-9)
    assert by_lambda.log_value == pytest.approx(lambda_slope, rel=1e-5, abs=1e-9)
    assert by_p.value == pytest.approx(p_slope / 2.0, rel=1e-5, abs=1e-9)


def test_slope_identity_between_p_and_lambda(engine, prototype):
    evaluation = engine.evaluate(prototype, 4, 0.6, 3.0)
    _, p_slope, lambda_slope = engine.log_derivatives(prototype, 4, 0.6, 3.0)
    weighted = sum(n * term / 3.0 ** n for n, term in enumerate(evaluation.terms))
    assert lambda_slope - p_slope == pytest.approx(weighted, rel=1e-12, abs=1e-13)


def test_derivative_of_constant_series_is_flagged(engine):
    constant = CoefficientSeries(name="c", coefficients=(2.0,))
    estimate = engine.derivative(constant, 0, 1.0, 1.0, "p")
    assert estimate.value == 0.0
    assert estimate.low_confidence


def test_origin_slope_is_first_coefficient(engine):
    series = builtin_series(BuiltinModelId.GEOMETRIC, 4)
    slope = engine.derivative(series, 4, 1e-5, 2.0, DerivativeWrt.LAMBDA)
    assert slope.value == pytest.approx(-1.0, rel=1e-3)


# --- Exact Taylor consistency ---
def test_taylor_reconstruction_recovers_coefficients(prototype):
    reconstructed = taylor_reconstruction(prototype, 2, 1)
    assert reconstructed[:3] == [Fraction(1), Fraction(-1), Fraction(1)]


def test_taylor_consistency_exact_through_order(prototype):
    residuals = taylor_consistency(prototype, 4, Fraction(3, 2))
    assert all(r == 0 for r in residuals[:5])
    assert residuals[5] != 0


@pytest.mark.parametrize("model", list(BuiltinModelId))
@pytest.mark.parametrize("N", range(1, 8))
def test_taylor_consistency_for_every_builtin(model, N):
    series = builtin_series(model, 7)
    residuals = taylor_consistency(series, N, Fraction(7, 5))
    assert all(r == 0 for r in residuals[:N + 1])
