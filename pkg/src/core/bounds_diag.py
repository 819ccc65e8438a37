# src/core/bounds_diag.py
"""
Bound verdicts and convergence diagnostics for chains of extrema.

- bound_verdict: monotonicity of S_N across orders (at λ₀ and on a λ grid)
  turned into lower/upper/inconclusive verdicts, never overclaiming.
- appendix_diagnostics: c(N) = p(N+1)/p(N), the recursion
  1/c(N+1) = 1 - 1/c(N) + 1/c(N)², a fit of K in 1/c(N) = 1 - 1/(N+K),
  α = A_1 - λ∂A_1/∂λ and the ΔS_N predictions.
- slope_checks: value and slope at the origin, sign changes of dS_N/dλ.
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import least_squares

from src.core.resum_engine import ResumEngine, get_engine
from src.models.report_models import (
    BoundBasis, BoundDirection, BoundVerdict, CNSequence, DeltaSComparison, DiagnosticsReport,
    IdentityCheck, OpenProblemEvidence, SlopeCheckResult,
)
from src.models.resum_models import DerivativeWrt, ExtremumKind, ExtremumRecord, ExtremumSequence, SelectionRule
from src.models.series_models import CoefficientSeries

CONSTANT_RTOL = 1e-12
CURVE_RTOL = 1e-6
DECOMPOSITION_RTOL = 1e-12
EXTREMUM_IDENTITY_RTOL = 1e-4
ORIGIN_SLOPE_RTOL = 1e-3

CAVEAT_NOT_GUARANTEED = "not a priori guaranteed: a decreasing chain of minima"
CAVEAT_LOCAL_EXTREMA = "local extrema: the optimal-p argument for bounds is unavailable"
CAVEAT_GRID = "trend at λ₀ does not hold at every point of the λ grid"


class ResummedCurve:
    """S_N(λ, p) at frozen p as a function of λ, or λ·S'_N(λ, p) for an auxiliary series."""

    def __init__(self, series: CoefficientSeries, N: int, p: float, engine: Optional[ResumEngine] = None,
                 reconstruct: Optional[bool] = None):
        self.series, self.N, self.p = series, N, p
        self.engine = engine or get_engine()
        self.reconstruct = series.is_auxiliary if reconstruct is None else reconstruct

    def value(self, lam: float) -> float:
        value = self.engine.evaluate(self.series, self.N, lam, self.p).value
        return lam * value if self.reconstruct else value

    __call__ = value

    def slope(self, lam: float) -> float:
        value, _, lambda_slope = self.engine.log_derivatives(self.series, self.N, lam, self.p)
        return value + lambda_slope if self.reconstruct else lambda_slope / lam

    def values(self, lambdas: Sequence[float]) -> np.ndarray:
        return np.array([self.value(float(lam)) for lam in lambdas])

    def slopes(self, lambdas: Sequence[float]) -> np.ndarray:
        return np.array([self.slope(float(lam)) for lam in lambdas])

    @property
    def origin_value(self) -> float:
        return 0.0 if self.reconstruct else self.series.prefactor * self.series.coefficients[0]

    @property
    def origin_slope(self) -> float:
        index = 0 if self.reconstruct else 1
        if index > self.series.order:
            return 0.0
        return self.series.prefactor * self.series.coefficients[index]


def lambda_grid(lambda0: float, points: int) -> np.ndarray:
    """Uniform grid on (0, λ₀], excluding the origin."""
    return lambda0 * np.arange(1, points + 1) / points


def grid_curves(series: CoefficientSeries, sequence: ExtremumSequence, lambdas: Sequence[float],
                engine: Optional[ResumEngine] = None, reconstruct: Optional[bool] = None) -> Dict[int, np.ndarray]:
    return {
        record.N: ResummedCurve(series, record.N, record.p_star, engine, reconstruct).values(lambdas)
        for record in sequence.found()
    }


# --- Bound verdicts ---
def _basis(sequence: ExtremumSequence, records: List[ExtremumRecord]) -> BoundBasis:
    if sequence.selection_rule in (SelectionRule.PRINCIPAL_MAX, SelectionRule.BAR_BRANCH) or \
            (records and all(not r.kind.is_min for r in records)):
        return BoundBasis.MAXIMA_CHAIN
    if any(r.kind is ExtremumKind.GLOBAL_MIN for r in records):
        return BoundBasis.GLOBAL_MINIMA_CHAIN
    return BoundBasis.LOCAL_CHAIN


def _curves_follow(curves: Mapping[int, np.ndarray], orders: List[int], increasing: bool) -> bool:
    present = [N for N in orders if N in curves]
    for a, b in zip(present, present[1:]):
        lower, upper = (curves[a], curves[b]) if increasing else (curves[b], curves[a])
        tol = CURVE_RTOL * np.maximum(1.0, np.maximum(np.abs(lower), np.abs(upper)))
        if np.any(upper < lower - tol):
            return False
    return True


def bound_verdict(sequence: ExtremumSequence, curves: Optional[Mapping[int, np.ndarray]] = None) -> BoundVerdict:
    """Direction of the bound suggested by the trend of S_N over consecutive available orders."""
    records = sequence.found()
    orders = [r.N for r in records]
    values = [r.S_value for r in records]
    basis = _basis(sequence, records)
    common = dict(basis=basis, orders=orders, s_values=values)

    if len(records) < 2:
        reason = "no extrema" if not records else "single order"
        return BoundVerdict(direction=BoundDirection.INCONCLUSIVE, monotone=False, reason=reason, **common)

    diffs = np.diff(values)
    scale = CONSTANT_RTOL * max(1.0, max(abs(v) for v in values))
    if np.all(np.abs(diffs) <= scale):
        return BoundVerdict(direction=BoundDirection.INCONCLUSIVE, monotone=True, reason="constant chain", **common)
    increasing = bool(np.all(diffs >= -scale))
    decreasing = bool(np.all(diffs <= scale))
    if not (increasing or decreasing):
        return BoundVerdict(direction=BoundDirection.INCONCLUSIVE, monotone=False, reason="no monotone trend",
                            **common)
    if curves is not None and not _curves_follow(curves, orders, increasing):
        return BoundVerdict(direction=BoundDirection.INCONCLUSIVE, monotone=True, caveats=[CAVEAT_GRID],
                            reason="trend not uniform in λ", **common)

    if basis is BoundBasis.MAXIMA_CHAIN:
        direction = BoundDirection.LOWER_BOUND if increasing else BoundDirection.UPPER_BOUND
        return BoundVerdict(direction=direction, monotone=True, caveats=[CAVEAT_LOCAL_EXTREMA], **common)
    if decreasing:
        return BoundVerdict(direction=BoundDirection.UPPER_BOUND, monotone=True, caveats=[CAVEAT_NOT_GUARANTEED],
                            **common)
    if basis is BoundBasis.GLOBAL_MINIMA_CHAIN:
        return BoundVerdict(direction=BoundDirection.LOWER_BOUND, monotone=True, **common)
    return BoundVerdict(direction=BoundDirection.INCONCLUSIVE, monotone=True,
                        reason="increasing chain of local minima without a global minimum", **common)


# --- c(N) ---
def recursion_residuals(ratios: Sequence[float]) -> List[float]:
    """|1/c(N+1) - (1 - 1/c(N) + 1/c(N)²)| for consecutive ratios."""
    residuals = []
    for c_now, c_next in zip(ratios, ratios[1:]):
        u = 1.0 / c_now
        residuals.append(abs(1.0 / c_next - (1.0 - u + u * u)))
    return residuals


def fit_k(orders: Sequence[int], ratios: Sequence[float]) -> Optional[float]:
    """K in 1/c(N) = 1 - 1/(N+K); needs every c(N) > 1."""
    if not ratios or any(c <= 1.0 for c in ratios):
        return None
    orders = np.asarray(orders, dtype=float)
    inverse = 1.0 / np.asarray(ratios, dtype=float)
    direct = 1.0 / (1.0 - inverse) - orders
    if len(ratios) <= 2:
        return float(direct.mean())
    lower = -orders.min() + 1e-9
    start = max(float(direct.mean()), lower + 1.0)
    fit = least_squares(lambda k: inverse - (1.0 - 1.0 / (orders + k[0])), x0=[start], bounds=([lower], [np.inf]))
    return float(fit.x[0])


def cn_sequence(records: Sequence[ExtremumRecord]) -> CNSequence:
    records = sorted(records, key=lambda r: r.N)
    orders = [r.N for r in records[:-1]]
    ratios = [b.p_star / a.p_star for a, b in zip(records, records[1:])]
    decreasing = all(c1 < c0 for c0, c1 in zip(ratios, ratios[1:]))
    return CNSequence(orders=orders, values=ratios, recursion_residuals=recursion_residuals(ratios),
                      strictly_decreasing=decreasing, K_fit=fit_k(orders, ratios))


# --- α and identity checks ---
def alpha_coefficient(series: CoefficientSeries, N: int, lam: float, p: float,
                      engine: ResumEngine) -> Tuple[float, float]:
    """α = A_1 - λ∂A_1/∂λ by central differences in ln λ with one Richardson level; returns (α, error)."""
    h = engine.log_step

    def a1(step: float) -> float:
        return engine.terms(series, N, lam * math.exp(step), p)[1]

    coarse = (a1(h) - a1(-h)) / (2.0 * h)
    fine = (a1(h / 2) - a1(-h / 2)) / h
    lambda_slope = (4.0 * fine - coarse) / 3.0
    return a1(0.0) - lambda_slope, abs(fine - coarse) / 3.0


def _relative(residual: float, reference: float) -> float:
    return residual / max(abs(reference), 1e-300)


def _identity_checks(series: CoefficientSeries, record: ExtremumRecord, lam0: float, engine: ResumEngine,
                     epsilon: float) -> List[IdentityCheck]:
    N, p = record.N, record.p_star
    evaluation = engine.evaluate(series, N, lam0, p)
    checks = []

    residual = abs(evaluation.value - evaluation.recombined()) / max(1.0, abs(evaluation.value))
    checks.append(IdentityCheck(name="decomposition", N=N, residual=residual, tolerance=DECOMPOSITION_RTOL,
                                passed=bool(residual <= DECOMPOSITION_RTOL)))

    expected = sum(n * term / p ** n for n, term in enumerate(evaluation.terms))
    measured = engine.derivative(series, N, lam0, p, DerivativeWrt.LAMBDA).log_value
    residual = _relative(abs(measured - expected), expected)
    checks.append(IdentityCheck(name="extremum_slope", N=N, residual=residual, tolerance=EXTREMUM_IDENTITY_RTOL,
                                passed=bool(residual <= EXTREMUM_IDENTITY_RTOL)))

    f = series.coefficients
    f2 = f[2] if series.order >= 2 else 0.0
    near_origin = engine.evaluate(series, N, epsilon, p).value
    residual = abs(near_origin - series.prefactor * (f[0] + f[1] * epsilon))
    tolerance = 2.0 * abs(series.prefactor) * (abs(f2) + 1.0) * epsilon ** 2
    checks.append(IdentityCheck(name="origin_value", N=N, residual=residual, tolerance=tolerance,
                                passed=bool(residual <= tolerance)))

    slope = engine.derivative(series, N, epsilon, p, DerivativeWrt.LAMBDA).value
    residual = _relative(abs(slope - series.prefactor * f[1]), series.prefactor * f[1])
    checks.append(IdentityCheck(name="origin_slope", N=N, residual=residual, tolerance=ORIGIN_SLOPE_RTOL,
                                passed=bool(residual <= ORIGIN_SLOPE_RTOL)))
    return checks


def appendix_diagnostics(series: CoefficientSeries, sequence: ExtremumSequence, lam0: float,
                         engine: Optional[ResumEngine] = None, lambda_grid_points: int = 20,
                         origin_epsilon: float = 1e-5, verdict: Optional[BoundVerdict] = None) -> DiagnosticsReport:
    engine = engine or get_engine()
    records = sequence.found()
    notes: List[str] = []
    if len(records) < 3:
        notes.append(f"only {len(records)} order(s) with a selected extremum; report is partial")

    cn = cn_sequence(records) if records else CNSequence(orders=[], values=[], recursion_residuals=[],
                                                         strictly_decreasing=True)
    terms_by_order = {r.N: engine.terms(series, r.N, lam0, r.p_star) for r in records}

    alpha_by_order: Dict[int, float] = {}
    alpha_errors: Dict[int, float] = {}
    for record in records:
        if record.N >= 1:
            alpha_by_order[record.N], alpha_errors[record.N] = alpha_coefficient(
                series, record.N, lam0, record.p_star, engine)

    delta_S: List[DeltaSComparison] = []
    for a, b in zip(records, records[1:]):
        terms = terms_by_order[a.N]
        inverse_c = a.p_star / b.p_star
        from_ratio = terms[1] / a.p_star * (inverse_c - 1.0) if len(terms) > 1 else 0.0
        from_asymptotics = None
        if len(terms) > 2 and terms[2] != 0.0 and a.N in alpha_by_order:
            gap = 1.0 / (a.N + cn.K_fit) if cn.K_fit is not None else inverse_c - 1.0
            from_asymptotics = alpha_by_order[a.N] * terms[1] / (2.0 * terms[2]) * gap ** 2
        measured = b.S_value - a.S_value
        delta_S.append(DeltaSComparison(N=a.N, measured=measured, from_ratio=from_ratio,
                                        from_asymptotics=from_asymptotics,
                                        sign_consistent=bool(np.sign(measured) == np.sign(from_ratio))))
    if delta_S and not all(d.sign_consistent for d in delta_S):
        logger.warning("ΔS_N sign predicted from c(N) disagrees with the measured ΔS_N for '{}'", series.name)

    identity_checks: List[IdentityCheck] = []
    for record in records:
        identity_checks.extend(_identity_checks(series, record, lam0, engine, origin_epsilon))
    if cn.values and all(c > 1.0 for c in cn.values):
        worst = max([c1 - c0 for c0, c1 in zip(cn.values, cn.values[1:])] + [0.0])
        identity_checks.append(IdentityCheck(name="cn_decreasing", N=cn.orders[-1], residual=max(worst, 0.0),
                                             tolerance=0.0, passed=cn.strictly_decreasing))

    grid = lambda_grid(lam0, lambda_grid_points)
    slope_profile: Dict[int, List[float]] = {}
    curvature_ratios: List[float] = []
    for record in records:
        curve = ResummedCurve(series, record.N, record.p_star, engine, reconstruct=False)
        slopes = np.concatenate(([curve.origin_slope], curve.slopes(grid)))
        slope_profile[record.N] = [float(s) for s in slopes]
        second = np.gradient(slopes, np.concatenate(([0.0], grid)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(second / slopes)
        curvature_ratios.extend(float(x) for x in ratio[np.isfinite(ratio)])

    last_c = cn.values[-1] if cn.values else None
    approaching = None
    if len(cn.values) >= 2:
        approaching = cn.strictly_decreasing and abs(cn.values[-1] - 1.0) < abs(cn.values[0] - 1.0)
    status = verdict.direction.value if verdict is not None else bound_verdict(sequence).direction.value

    alpha = alpha_by_order[records[-1].N] if records and records[-1].N in alpha_by_order else None
    alpha_error = alpha_errors.get(records[-1].N) if records else None
    return DiagnosticsReport(
        cn=cn, delta_S=delta_S, alpha=alpha, alpha_error=alpha_error, alpha_by_order=alpha_by_order,
        terms_by_order=terms_by_order, identity_checks=identity_checks, slope_profile=slope_profile,
        lambda_grid=[0.0] + [float(x) for x in grid],
        magic_sign_matches=all(d.sign_consistent for d in delta_S) if delta_S else None,
        open_problems=OpenProblemEvidence(
            cn_approaching_one=approaching, last_cn=last_c, bound_status=status,
            max_curvature_ratio=max(curvature_ratios) if curvature_ratios else None),
        partial=len(records) < 3, notes=notes,
    )


def slope_checks(series: CoefficientSeries, sequence: ExtremumSequence, lambdas: Sequence[float],
                 engine: Optional[ResumEngine] = None, reconstruct: Optional[bool] = None,
                 origin_epsilon: float = 1e-5) -> List[SlopeCheckResult]:
    """Origin value/slope and sign changes of dS_N/dλ for every selected record."""
    engine = engine or get_engine()
    lambdas = np.asarray(lambdas, dtype=float)
    results = []
    for record in sequence.found():
        curve = ResummedCurve(series, record.N, record.p_star, engine, reconstruct)
        expected_slope = curve.origin_slope
        value_residual = abs(curve.value(origin_epsilon) - curve.origin_value - expected_slope * origin_epsilon)
        slopes = curve.slopes(lambdas)
        signs = np.sign(slopes)
        flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
        crossings = [float(lambdas[i] - slopes[i] * (lambdas[i + 1] - lambdas[i]) / (slopes[i + 1] - slopes[i]))
                     for i in flips]
        results.append(SlopeCheckResult(
            N=record.N, p=record.p_star, origin_value_residual=value_residual,
            origin_slope=curve.slope(origin_epsilon), expected_origin_slope=expected_slope,
            slope_sign_constant=len(flips) == 0, sign_changes=crossings,
        ))
    return results
