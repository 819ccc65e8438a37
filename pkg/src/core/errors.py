# src/core/errors.py
"""Exception hierarchy for the resummation library. All errors derive from ResummationError."""

from typing import Optional, Sequence


class ResummationError(Exception):
    """Base class for every error raised by this package."""


class SeriesFormatError(ResummationError, ValueError):
    """A coefficient document could not be parsed. `field` names the offending entry."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class InsufficientCoefficientsError(ResummationError, ValueError):
    """More orders were requested than the model publishes."""


class AuxiliarySeriesError(ResummationError, ValueError):
    """The auxiliary series S/λ is undefined because f_0 != 0."""


class SeriesOrderError(ResummationError, ValueError):
    """A truncation order N lies outside what the series provides."""


class DomainError(ResummationError, ValueError):
    """An argument lies outside the domain of an operation."""


class QuadratureError(ResummationError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual estimate {residual:.3e})")


class AmbiguousSelectionError(ResummationError):
    def __init__(self, message: str, candidates: Sequence[object]):
        self.candidates = list(candidates)
        listing = "; ".join(str(candidate) for candidate in self.candidates)
        super().__init__(f"{message}: {listing}")


class NoFixedPointError(ResummationError):
    """No branch of extrema settles towards a constant p₀."""


class NoZeroInBracketError(ResummationError, ValueError):
    """The curve does not change sign on the supplied bracket."""


class NotBorelSummableError(ResummationError):
    """The Borel integral is ambiguous (a pole sits on the positive real axis)."""
