# src/core/oracles.py
"""
Reference values independent of the resummation: Borel integrals of the
example models, the principal-value split of the model with a pole at z = 5,
the Schwinger proper-time integral, and zero/slope extraction for curves.
"""

import math
from functools import lru_cache
from typing import Callable, Dict, Tuple, Union

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import exprel

from src.core.errors import DomainError, NoZeroInBracketError, NotBorelSummableError, QuadratureError
from src.core.series_core import bernoulli_numbers
from src.models.report_models import ExactModel, PVSplit, ZeroSlopeResult
from src.models.series_models import BuiltinModelId

PV_POLE = 5.0
SCHWINGER_SPLIT = 0.5
SCHWINGER_TERMS = 14
TAIL_CUT = 36.84  # e^{-36.84} ≈ 1e-16
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
LITERATURE_FIXED_POINT = {"lambda_star": 1.413, "lambda_star_error": 0.006, "omega": 0.812, "omega_error": 0.016}

EXACT_MODELS: Dict[BuiltinModelId, ExactModel] = {
    BuiltinModelId.PROTOTYPE: ExactModel(id="prototype", borel_function="1/(1+z)", closed_form=False),
    BuiltinModelId.GEOMETRIC: ExactModel(id="geometric", borel_function="exp(-z)", closed_form=True),
    BuiltinModelId.PV_MODEL: ExactModel(id="pv_model", borel_function="1/((1+z)(5-z))", closed_form=False,
                                        borel_summable=False, pole=PV_POLE),
    BuiltinModelId.EULER_HEISENBERG: ExactModel(
        id="euler_heisenberg", borel_function="Schwinger proper-time integral", closed_form=False),
}


def _checked_quad(func: Callable[[float], float], a: float, b: float, label: str) -> float:
    value, error = quad(func, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if error > 1e3 * max(QUAD_EPSABS, QUAD_EPSREL * abs(value)):
        raise QuadratureError(f"{label} did not converge", residual=error)
    return value


def _check_lambda(lam: float) -> None:
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"λ must be positive and finite, got {lam}")


# --- Schwinger integrand ---
@lru_cache(maxsize=1)
def _coth_series() -> np.ndarray:
    """Coefficients of s^{2k-3}, k = 2.., in (coth s - 1/s - s/3)/s²."""
    table = bernoulli_numbers(2 * (SCHWINGER_TERMS + 1))
    return np.array([float(2 ** (2 * k) * table[2 * k] / math.factorial(2 * k))
                     for k in range(2, SCHWINGER_TERMS + 2)])


def schwinger_integrand(s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """(coth s - 1/s - s/3)/s², regular at the origin where it behaves like -s/45."""
    s_arr = np.asarray(s, dtype=float)
    coefficients = _coth_series()
    small = s_arr < SCHWINGER_SPLIT
    # Horner in s² on the odd series s·Σ c_k s^{2(k-2)}
    s2 = s_arr * s_arr
    series = np.zeros_like(s_arr)
    for c in coefficients[::-1]:
        series = series * s2 + c
    series = series * s_arr
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = (1.0 / np.tanh(s_arr) - 1.0 / s_arr - s_arr / 3.0) / s2
    result = np.where(small, series, direct)
    return float(result) if result.ndim == 0 else result


def euler_heisenberg_sum(lam: float) -> float:
    """100 ∫₀^∞ ds/s² (coth s - 1/s - s/3) e^{-s/√λ}."""
    _check_lambda(lam)
    root = math.sqrt(lam)
    s_max = TAIL_CUT * root

    def integrand(s: float) -> float:
        return schwinger_integrand(s) * math.exp(-s / root)

    head = _checked_quad(integrand, 0.0, min(SCHWINGER_SPLIT, s_max), "Schwinger integral (series part)")
    tail = _checked_quad(integrand, SCHWINGER_SPLIT, s_max, "Schwinger integral") if s_max > SCHWINGER_SPLIT else 0.0
    return 100.0 * (head + tail)


def exact_sum(model: Union[BuiltinModelId, str], lam: float) -> float:
    model_id = BuiltinModelId(model)
    _check_lambda(lam)
    if model_id is BuiltinModelId.PROTOTYPE:
        # (1/λ)∫ e^{-z/λ}/(1+z) dz with z = λu
        return _checked_quad(lambda u: math.exp(-u) / (1.0 + lam * u), 0.0, np.inf, "prototype Borel integral")
    if model_id is BuiltinModelId.GEOMETRIC:
        return 1.0 / (1.0 + lam)
    if model_id is BuiltinModelId.EULER_HEISENBERG:
        return euler_heisenberg_sum(lam)
    if model_id is BuiltinModelId.PV_MODEL:
        raise NotBorelSummableError("the pv_model Borel integral crosses a pole at z=5; use pv_split")
    raise DomainError(f"no exact sum is known for '{model_id.value}'")


# --- Principal-value split ---
def _subtracted_integrand(z: float, lam: float) -> float:
    """(e^{-z/λ} - e^{-5/λ}) / ((5-z)(1+z)λ), with the removable point z=5 resolved by exprel."""
    distance = PV_POLE - z
    ratio = math.exp(-min(z, PV_POLE) / lam) * float(exprel(-abs(distance) / lam)) / lam
    return ratio / ((1.0 + z) * lam)


def pv_split(lam: float) -> PVSplit:
    """S_exact = S_pert - S_np for the model with Borel function 1/((1+z)(5-z))."""
    _check_lambda(lam)
    inner = _checked_quad(lambda z: _subtracted_integrand(z, lam), 0.0, PV_POLE, "PV subtracted integral")
    outer = _checked_quad(lambda z: _subtracted_integrand(z, lam), PV_POLE, np.inf, "PV subtracted tail")
    s_exact = inner + outer
    s_np = math.log(PV_POLE) * math.exp(-PV_POLE / lam) / (6.0 * lam)
    logger.debug("PV split at λ={}: exact={:.6g}, np={:.6g}", lam, s_exact, s_np)
    return PVSplit(lam=lam, s_pert=s_exact + s_np, s_np=s_np, s_exact=s_exact)


# --- Zero and slope ---
def zero_and_slope(curve: Callable[[float], float], bracket: Tuple[float, float],
                   xtol: float = 1e-10, slope_step: float = 1e-5) -> ZeroSlopeResult:
    low, high = bracket
    f_low, f_high = curve(low), curve(high)
    if f_low == 0.0:
        root = low
    elif f_high == 0.0:
        root = high
    elif f_low * f_high > 0:
        raise NoZeroInBracketError(f"no zero in bracket [{low}, {high}] (values {f_low:.6g}, {f_high:.6g})")
    else:
        root = brentq(curve, low, high, xtol=xtol)
    h = slope_step * max(1.0, abs(root))
    slope = (curve(root + h) - curve(root - h)) / (2.0 * h)
    return ZeroSlopeResult(lambda_star=root, omega=slope)
