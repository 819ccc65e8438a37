# src/core/series_core.py
"""
Perturbation series: the built-in example models, exact Bernoulli numbers,
auxiliary series and naive partial sums.

Key Features:
- Deterministic coefficient rules for every built-in model, at any order.
- Bernoulli numbers in exact rational arithmetic, converted to binary64 once.
- Auxiliary series S/λ for series with a vanishing constant term.
"""

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Dict, List, Union

import numpy as np
from loguru import logger

from src.core.errors import AuxiliarySeriesError, DomainError, InsufficientCoefficientsError, SeriesOrderError
from src.models.series_models import (
    BernoulliTable, BuiltinModel, BuiltinModelId, CoefficientSeries, SeriesOrigin,
)

BETA_POLYMER_COEFFICIENTS = (0.0, -1.0, 1.0, -0.439815, 0.389923, -0.447316, 0.633855, -1.03493)
EULER_HEISENBERG_PREFACTOR = 1600.0

BUILTIN_MODELS: Dict[BuiltinModelId, BuiltinModel] = {
    BuiltinModelId.PROTOTYPE: BuiltinModel(
        id=BuiltinModelId.PROTOTYPE, description="f_n = (-1)^n n!, Borel function 1/(1+z)",
        default_lambda0=1.0, lambda_range=(0.0, 1.0)),
    BuiltinModelId.GEOMETRIC: BuiltinModel(
        id=BuiltinModelId.GEOMETRIC, description="f_n = (-1)^n, sum 1/(1+λ), entire Borel function e^{-z}",
        default_lambda0=1.0, lambda_range=(0.0, 1.0)),
    BuiltinModelId.PV_MODEL: BuiltinModel(
        id=BuiltinModelId.PV_MODEL, description="f_n = ((-1)^n + 5^{-(n+1)}) n!/6, Borel poles at z=-1 and z=5",
        default_lambda0=1.0, lambda_range=(0.0, 10.0)),
    BuiltinModelId.EULER_HEISENBERG: BuiltinModel(
        id=BuiltinModelId.EULER_HEISENBERG,
        description="Euler-Heisenberg weak-field series, f_n = 4^{n-1} B_{2n+2} / (2n(2n+1)(2n+2))",
        default_lambda0=10.0, lambda_range=(0.0, 10.0), prefactor=EULER_HEISENBERG_PREFACTOR),
    BuiltinModelId.BETA_POLYMER: BuiltinModel(
        id=BuiltinModelId.BETA_POLYMER, description="polymer-case beta function, seven published coefficients",
        default_lambda0=1.0, lambda_range=(0.0, 2.0), max_published_order=len(BETA_POLYMER_COEFFICIENTS) - 1),
}

SeriesLike = Union[BuiltinModelId, str]


@lru_cache(maxsize=None)
def _bernoulli_sequence(max_index: int) -> tuple:
    values = [Fraction(1)]
    for m in range(1, max_index + 1):
        values.append(-sum(comb(m + 1, k) * values[k] for k in range(m)) / (m + 1))
    return tuple(values)


def bernoulli_numbers(max_even_index: int) -> BernoulliTable:
    """Exact B_0, B_2, ..., B_max from Σ_{k=0}^{m} C(m+1,k) B_k = 0."""
    if max_even_index < 2 or max_even_index % 2:
        raise DomainError(f"max_even_index must be an even integer >= 2, got {max_even_index}")
    values = _bernoulli_sequence(max_even_index)
    return BernoulliTable(entries={index: values[index] for index in range(0, max_even_index + 1, 2)})


# --- Coefficient rules ---
def _prototype(n: int) -> float:
    return float((-1) ** n * factorial(n))


def _geometric(n: int) -> float:
    return float((-1) ** n)


def _pv_model(n: int) -> float:
    return float((Fraction((-1) ** n) + Fraction(1, 5 ** (n + 1))) * factorial(n) / 6)


def _euler_heisenberg_exact(n: int, table: BernoulliTable) -> Fraction:
    if n == 0:
        return Fraction(0)
    return Fraction(4) ** (n - 1) * table[2 * n + 2] / (2 * n * (2 * n + 1) * (2 * n + 2))


_RULES: Dict[BuiltinModelId, Callable[[int], float]] = {
    BuiltinModelId.PROTOTYPE: _prototype,
    BuiltinModelId.GEOMETRIC: _geometric,
    BuiltinModelId.PV_MODEL: _pv_model,
}


def builtin_series(model: SeriesLike, max_order: int) -> CoefficientSeries:
    model_id = BuiltinModelId(model)
    if max_order < 1:
        raise SeriesOrderError(f"max_order must be >= 1, got {max_order}")
    spec = BUILTIN_MODELS[model_id]

    if model_id is BuiltinModelId.BETA_POLYMER:
        if max_order > spec.max_published_order:
            raise InsufficientCoefficientsError(
                f"insufficient published coefficients: beta_polymer has orders 0..{spec.max_published_order}, "
                f"requested {max_order}")
        coefficients: List[float] = list(BETA_POLYMER_COEFFICIENTS[: max_order + 1])
    elif model_id is BuiltinModelId.EULER_HEISENBERG:
        table = bernoulli_numbers(2 * max_order + 2)
        coefficients = [float(_euler_heisenberg_exact(n, table)) for n in range(max_order + 1)]
    else:
        coefficients = [_RULES[model_id](n) for n in range(max_order + 1)]

    logger.debug("Built {} series through order {}", model_id.value, max_order)
    return CoefficientSeries(
        name=model_id.value, coefficients=tuple(coefficients), prefactor=spec.prefactor,
        origin=SeriesOrigin.BUILTIN, model_id=model_id,
    )


def auxiliary_series(parent: CoefficientSeries) -> CoefficientSeries:
    """Series of S/λ: f'_n = f_{n+1}. Evaluations must be multiplied back by λ."""
    if parent.coefficients[0] != 0.0:
        raise AuxiliarySeriesError(
            f"auxiliary series undefined: '{parent.name}' has f_0 = {parent.coefficients[0]} != 0")
    if parent.order < 1:
        raise AuxiliarySeriesError(f"auxiliary series undefined: '{parent.name}' has no f_1")
    return CoefficientSeries(
        name=f"{parent.name}_aux", coefficients=parent.coefficients[1:], prefactor=parent.prefactor,
        origin=SeriesOrigin.AUXILIARY, model_id=parent.model_id, parent=parent.name,
    )


def partial_sum(series: CoefficientSeries, N: int, lam: float) -> float:
    if not 0 <= N <= series.order:
        raise SeriesOrderError(f"N={N} outside 0..{series.order} for '{series.name}'")
    if not np.isfinite(lam):
        raise DomainError(f"λ must be finite, got {lam}")
    value = np.polynomial.polynomial.polyval(lam, series.truncated(N).coefficients)
    return float(series.prefactor * value)


def partial_sums(series: CoefficientSeries, orders: List[int], lambdas: np.ndarray) -> Dict[int, np.ndarray]:
    """Naive partial sums on a λ grid, one array per order (divergence plots)."""
    lambdas = np.asarray(lambdas, dtype=float)
    out_of_range = [N for N in orders if not 0 <= N <= series.order]
    if out_of_range:
        raise SeriesOrderError(f"orders {out_of_range} outside 0..{series.order} for '{series.name}'")
    return {
        N: series.prefactor * np.polynomial.polynomial.polyval(lambdas, series.truncated(N).coefficients)
        for N in orders
    }
