# src/core/resum_engine.py
"""
Truncated, conformally mapped Borel resummation S_N(λ,p).

The Borel integral is rewritten with z = 4w/(p(1-w)²) and the Borel
polynomial re-expanded in w up to w^N, which leaves the moments

    I_m(q) = ∫₀^∞ e^{-z} w(λz)^m dz,     q = λp,

as the only integrals. Their log-derivatives J_m = q ∂I_m/∂q are integrated
in the same pass, which gives p∂S/∂p and λ∂S/∂λ without differencing.

Key Features:
- Moment vectors cached per exact (λ, p) bit pattern and quadrature fingerprint.
- Every moment integrated relative to its own magnitude (the (4/p)ⁿ weights
  amplify tiny high-order moments at small p).
- Exact-rational Taylor consistency check of the truncation.
"""

import math
import threading
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError
from scipy.integrate import quad_vec
from scipy.special import roots_laguerre

from src.core.errors import DomainError, QuadratureError, SeriesOrderError
from src.models.resum_models import (
    ConformalParams, DerivativeEstimate, DerivativeWrt, QuadratureRule, QuadratureSpec, ResumEvaluation,
)
from src.models.series_models import CoefficientSeries

DEFAULT_QUAD = QuadratureSpec()
DEFAULT_ORDER_FLOOR = 16
DEFAULT_LOG_STEP = 1e-4
_TINY = 1e-300
_SWITCH_X = 8.0  # w = 1/2 here; above it w is formed as 1 - 2/(s+1)
_ROUNDOFF_ACCEPT = 1e-9  # scaled error tolerated when quad_vec stops on rounding

Number = Union[float, np.ndarray]


# --- Conformal map ---
def _map_pieces(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """w and q∂w/∂q as functions of x = qz."""
    s = np.sqrt(1.0 + x)
    t = s + 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(x < _SWITCH_X, x / (t * t), 1.0 - 2.0 / t)
        dw = x / (s * t * t)
    w = np.where(np.isinf(x), 1.0, w)
    dw = np.where(np.isinf(x), 0.0, dw)
    return w, dw


def _check_positive(value: float, label: str) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{label} must be positive and finite, got {value}")


def conformal_params(p: float) -> ConformalParams:
    try:
        return ConformalParams(p=p)
    except ValidationError as e:
        raise DomainError(f"map parameter p must be positive and finite, got {p}") from e


def conformal_w(z: Number, p: float) -> Number:
    """w(z) = (√(1+zp) - 1)/(√(1+zp) + 1), mapping the cut plane onto the unit disc."""
    p = conformal_params(p).p
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise DomainError("conformal_w is only defined on the contour z >= 0")
    w, _ = _map_pieces(z_arr * p)
    return float(w) if w.ndim == 0 else w


def conformal_z(w: Number, p: float) -> Number:
    """Inverse map z = 4w / (p(1-w)²)."""
    p = conformal_params(p).p
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or np.any(w_arr >= 1) or np.any(np.isnan(w_arr)):
        raise DomainError("conformal_z requires 0 <= w < 1")
    z = 4.0 * w_arr / (p * (1.0 - w_arr) ** 2)
    return float(z) if z.ndim == 0 else z


def expansion_coefficient(n: int, k: int) -> int:
    """Coefficient of w^{n+k} in w^n (1-w)^{-2n}; δ_{k0} for n = 0."""
    if n < 0 or k < 0:
        raise DomainError(f"expansion_coefficient needs n, k >= 0, got ({n}, {k})")
    if n == 0:
        return 1 if k == 0 else 0
    return math.comb(2 * n + k - 1, k)


@lru_cache(maxsize=64)
def _expansion_matrix(N: int) -> np.ndarray:
    matrix = np.zeros((N + 1, N + 1))
    for n in range(N + 1):
        for k in range(N - n + 1):
            matrix[n, n + k] = expansion_coefficient(n, k)
    matrix.flags.writeable = False
    return matrix


@lru_cache(maxsize=8)
def _laguerre_rule(node_count: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_laguerre(node_count)
    return nodes, weights


def _laguerre_moments(orders: np.ndarray, q: float, node_count: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = _laguerre_rule(node_count)
    w, dw = _map_pieces(q * nodes)
    lower_powers = w[None, :] ** (orders[:, None] - 1)
    values = (lower_powers * w[None, :]) @ weights
    log_derivatives = (orders[:, None] * lower_powers * dw[None, :]) @ weights
    return values, log_derivatives


# --- Moment cache ---
class MomentBlock(NamedTuple):
    values: np.ndarray
    log_derivatives: np.ndarray
    errors: np.ndarray
    log_derivative_errors: np.ndarray

    @property
    def max_order(self) -> int:
        return len(self.values) - 1


class MomentCache:
    """Thread-safe map (λ, p, quadrature fingerprint) -> moment vectors I_0..I_M, J_0..J_M."""

    def __init__(self):
        self._store: Dict[tuple, MomentBlock] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(lam: float, p: float, fingerprint: tuple) -> tuple:
        return float(lam).hex(), float(p).hex(), fingerprint

    def get(self, lam: float, p: float, fingerprint: tuple, m_max: int) -> Optional[MomentBlock]:
        with self._lock:
            block = self._store.get(self.key(lam, p, fingerprint))
            if block is not None and block.max_order >= m_max:
                self.hits += 1
                return block
            self.misses += 1
            return None

    def put(self, lam: float, p: float, fingerprint: tuple, block: MomentBlock) -> MomentBlock:
        # Concurrent writers may race; the longest block wins and shorter ones agree on their overlap.
        with self._lock:
            key = self.key(lam, p, fingerprint)
            current = self._store.get(key)
            if current is None or current.max_order < block.max_order:
                self._store[key] = block
                return block
            return current

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.hits = self.misses = 0

    def __len__(self) -> int:
        return len(self._store)


class ResumEngine:
    """Evaluates S_N(λ,p), its decomposition A_n(N) and its derivatives for one quadrature spec."""

    def __init__(self, quad: QuadratureSpec = DEFAULT_QUAD, order_floor: int = DEFAULT_ORDER_FLOOR,
                 log_step: float = DEFAULT_LOG_STEP, cache: Optional[MomentCache] = None):
        self.quad = quad
        self.order_floor = order_floor
        self.log_step = log_step
        self.cache = cache if cache is not None else MomentCache()

    # --- Moments ---
    def moments(self, m_max: int, lam: float, p: float) -> MomentBlock:
        _check_positive(lam, "λ")
        p = conformal_params(p).p
        fingerprint = self.quad.fingerprint
        block = self.cache.get(lam, p, fingerprint, m_max)
        if block is None:
            block = self.cache.put(lam, p, fingerprint, self._integrate(max(m_max, self.order_floor), lam * p))
        return block

    def moment(self, m: int, lam: float, p: float) -> float:
        if m < 0:
            raise DomainError(f"moment order must be >= 0, got {m}")
        return float(self.moments(m, lam, p).values[m])

    def _integrate(self, max_order: int, q: float) -> MomentBlock:
        orders = np.arange(1, max_order + 1)
        estimate_I, estimate_J = _laguerre_moments(orders, q, self.quad.node_count)

        if self.quad.rule is QuadratureRule.GAUSS_LAGUERRE:
            half_I, half_J = _laguerre_moments(orders, q, max(self.quad.node_count // 2, 8))
            errors_I, errors_J = np.abs(estimate_I - half_I), np.abs(estimate_J - half_J)
            limit_I = self.quad.rel_tol * np.abs(estimate_I) + self.quad.abs_tol
            limit_J = self.quad.rel_tol * np.abs(estimate_J) + self.quad.abs_tol
            if np.any(errors_I > limit_I) or np.any(errors_J > limit_J):
                residual = float(max(np.max(errors_I / limit_I), np.max(errors_J / limit_J)))
                raise QuadratureError(
                    f"Gauss-Laguerre moments with {self.quad.node_count} nodes not converged at q={q:.6g}",
                    residual=residual)
            values, log_derivatives = estimate_I, estimate_J
        else:
            values, log_derivatives, errors_I, errors_J = self._adaptive(orders, q, estimate_I, estimate_J)

        return MomentBlock(
            values=np.concatenate(([1.0], values)),
            log_derivatives=np.concatenate(([0.0], log_derivatives)),
            errors=np.concatenate(([0.0], errors_I)),
            log_derivative_errors=np.concatenate(([0.0], errors_J)),
        )

    def _adaptive(self, orders: np.ndarray, q: float, estimate_I: np.ndarray,
                  estimate_J: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        scale_I = np.where(np.abs(estimate_I) > _TINY, np.abs(estimate_I), 1.0)
        scale_J = np.where(np.abs(estimate_J) > _TINY, np.abs(estimate_J), 1.0)
        upper = 50.0 + 10.0 * float(orders[-1])
        lower_orders = orders - 1

        def integrand(z: float) -> np.ndarray:
            x = q * z
            s = math.sqrt(1.0 + x)
            t = s + 1.0
            w = x / (t * t) if x < _SWITCH_X else 1.0 - 2.0 / t
            dw = x / (s * t * t)
            weight = math.exp(-z)
            lower_powers = w ** lower_orders
            return np.concatenate((weight * lower_powers * w / scale_I,
                                   weight * orders * lower_powers * dw / scale_J))

        points = [c / q for c in (0.1, 1.0, 10.0) if 0.0 < c / q < upper]
        result, error, info = quad_vec(
            integrand, 0.0, upper, epsabs=self.quad.abs_tol, epsrel=self.quad.rel_tol,
            norm="max", points=points or None, full_output=True,
        )
        if not info.success and not (info.status == 2 and error <= _ROUNDOFF_ACCEPT):
            raise QuadratureError(f"adaptive moment quadrature failed at q={q:.6g}: {info.message}",
                                  residual=float(error))
        size = len(orders)
        scaled_error = np.maximum(float(error), np.finfo(float).eps * np.abs(result))
        return (result[:size] * scale_I, result[size:] * scale_J,
                scaled_error[:size] * scale_I, scaled_error[size:] * scale_J)

    # --- Resummation ---
    @staticmethod
    def _check_order(series: CoefficientSeries, N: int) -> None:
        if not 0 <= N <= series.order:
            raise SeriesOrderError(f"N={N} outside 0..{series.order} for '{series.name}'")

    @staticmethod
    def _borel_weights(series: CoefficientSeries, N: int) -> np.ndarray:
        """prefactor · f_n/n! · 4ⁿ for n = 0..N."""
        return np.array([series.prefactor * series.coefficients[n] / math.factorial(n) * 4.0 ** n
                         for n in range(N + 1)])

    def _pieces(self, series: CoefficientSeries, N: int, lam: float, p: float):
        self._check_order(series, N)
        block = self.moments(N, lam, p)
        matrix = _expansion_matrix(N)
        terms = self._borel_weights(series, N) * (matrix @ block.values[: N + 1])
        inverse_powers = p ** -np.arange(N + 1, dtype=float)
        return block, matrix, terms, inverse_powers

    def evaluate(self, series: CoefficientSeries, N: int, lam: float, p: float) -> ResumEvaluation:
        block, matrix, terms, inverse_powers = self._pieces(series, N, lam, p)
        weights = np.abs(self._borel_weights(series, N)) * inverse_powers
        error = float(weights @ (matrix @ block.errors[: N + 1]))
        return ResumEvaluation(
            value=float(terms @ inverse_powers), N=N, lam=lam, p=p,
            terms=[float(term) for term in terms], quadrature_error_estimate=error,
        )

    def terms(self, series: CoefficientSeries, N: int, lam: float, p: float) -> List[float]:
        _, _, terms, _ = self._pieces(series, N, lam, p)
        return [float(term) for term in terms]

    def log_derivatives(self, series: CoefficientSeries, N: int, lam: float, p: float) -> Tuple[float, float, float]:
        """(S, p∂S/∂p, λ∂S/∂λ) from the analytic moment derivatives."""
        block, matrix, terms, inverse_powers = self._pieces(series, N, lam, p)
        scaled_weights = self._borel_weights(series, N) * inverse_powers
        lambda_slope = float(scaled_weights @ (matrix @ block.log_derivatives[: N + 1]))
        value_terms = terms * inverse_powers
        p_slope = lambda_slope - float(np.arange(N + 1) @ value_terms)
        return float(value_terms.sum()), p_slope, lambda_slope

    def derivative(self, series: CoefficientSeries, N: int, lam: float, p: float,
                   wrt: Union[DerivativeWrt, str] = DerivativeWrt.P) -> DerivativeEstimate:
        """∂S/∂p or ∂S/∂λ by central differences in log x with one Richardson level."""
        wrt = DerivativeWrt(wrt)
        x0 = p if wrt is DerivativeWrt.P else lam
        h = self.log_step
        evaluations: Dict[float, ResumEvaluation] = {}

        def at(step: float) -> float:
            x = x0 * math.exp(step)
            point = self.evaluate(series, N, lam, x) if wrt is DerivativeWrt.P else self.evaluate(series, N, x, p)
            evaluations[step] = point
            return point.value

        coarse = (at(h) - at(-h)) / (2.0 * h)
        fine = (at(h / 2) - at(-h / 2)) / h
        log_value = (4.0 * fine - coarse) / 3.0
        truncation = abs(fine - coarse) / 3.0
        noise = max(e.quadrature_error_estimate + np.finfo(float).eps * abs(e.value) for e in evaluations.values()) / h
        low_confidence = abs(log_value) < 10.0 * noise
        if low_confidence:
            logger.debug("Derivative wrt {} at {:.6g} is within the noise floor ({:.3e})", wrt.value, x0, noise)
        return DerivativeEstimate(
            wrt=wrt, at=x0, value=log_value / x0, log_value=log_value,
            error=(truncation + noise) / x0, low_confidence=low_confidence,
        )

    def curve(self, series: CoefficientSeries, N: int, p: float, lambdas: np.ndarray,
              reconstruct: bool = False) -> np.ndarray:
        """S_N(λ,p) on a λ grid with p frozen; λ·S_N when reconstructing from an auxiliary series."""
        values = np.array([self.evaluate(series, N, float(lam), p).value for lam in lambdas])
        return values * np.asarray(lambdas, dtype=float) if reconstruct else values


@lru_cache(maxsize=8)
def get_engine(quad: QuadratureSpec = DEFAULT_QUAD, order_floor: int = DEFAULT_ORDER_FLOOR,
               log_step: float = DEFAULT_LOG_STEP) -> ResumEngine:
    return ResumEngine(quad=quad, order_floor=order_floor, log_step=log_step)


def moment(m: int, lam: float, p: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    return get_engine(quad).moment(m, lam, p)


def resum_eval(series: CoefficientSeries, N: int, lam: float, p: float,
               quad: QuadratureSpec = DEFAULT_QUAD) -> ResumEvaluation:
    return get_engine(quad).evaluate(series, N, lam, p)


def term_decomposition(series: CoefficientSeries, N: int, lam: float, p: float,
                       quad: QuadratureSpec = DEFAULT_QUAD) -> List[float]:
    return get_engine(quad).terms(series, N, lam, p)


def resum_derivative(series: CoefficientSeries, N: int, lam: float, p: float,
                     quad: QuadratureSpec = DEFAULT_QUAD,
                     wrt: Union[DerivativeWrt, str] = DerivativeWrt.P) -> DerivativeEstimate:
    return get_engine(quad).derivative(series, N, lam, p, wrt)


# --- Exact Taylor consistency ---
def _half_binomial(k: int) -> Fraction:
    value = Fraction(1)
    for i in range(k):
        value *= (Fraction(1, 2) - i) / (i + 1)
    return value


def _truncated_product(a: List[Fraction], b: List[Fraction], degree: int) -> List[Fraction]:
    out = [Fraction(0)] * (degree + 1)
    for i, a_i in enumerate(a):
        if a_i == 0:
            continue
        for j in range(degree + 1 - i):
            out[i + j] += a_i * b[j]
    return out


def taylor_reconstruction(series: CoefficientSeries, N: int, p: Union[float, Fraction]) -> List[Fraction]:
    """z-coefficients (through z^{N+1}) of the w-truncated Borel polynomial composed with w(z)."""
    ResumEngine._check_order(series, N)
    p_exact = Fraction(p)
    if p_exact <= 0:
        raise DomainError(f"p must be positive, got {p}")
    degree = N + 1
    w_series = [Fraction(0)] + [-2 * _half_binomial(j + 1) * p_exact ** j for j in range(1, degree + 1)]
    f = [Fraction(c) for c in series.coefficients]

    result = [Fraction(0)] * (degree + 1)
    power = [Fraction(1)] + [Fraction(0)] * degree
    for m in range(N + 1):
        c_m = sum((f[n] / math.factorial(n) * (4 / p_exact) ** n * expansion_coefficient(n, m - n)
                   for n in range(m + 1)), Fraction(0))
        result = [r + c_m * x for r, x in zip(result, power)]
        power = _truncated_product(power, w_series, degree)
    return result


def taylor_consistency(series: CoefficientSeries, N: int, p: Union[float, Fraction]) -> List[Fraction]:
    """Residuals (reconstructed − f_j/j!) for j = 0..N+1; zero through N, generically not at N+1."""
    reconstructed = taylor_reconstruction(series, N, p)
    residuals = []
    for j, value in enumerate(reconstructed):
        target = Fraction(series.coefficients[j]) / math.factorial(j) if j <= series.order else Fraction(0)
        residuals.append(value - target)
    return residuals
