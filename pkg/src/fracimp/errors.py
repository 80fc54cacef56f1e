"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class FracImpError(Exception):
    """Base class for all errors raised by :mod:`fracimp`."""


class OrderOutOfRange(FracImpError, ValueError):
    """A fractional order or Mittag-Leffler parameter lies outside its domain."""


class AccuracyLoss(FracImpError, ArithmeticError):
    """A special-function evaluation cannot reach its advertised accuracy."""


class QuadratureFailure(FracImpError, ArithmeticError):
    """A quadrature rule could not be applied or did not meet its tolerance."""


class StencilUnderflow(FracImpError, ValueError):
    """A finite-difference stencil would reach past the origin of a sample."""


class DimensionMismatch(FracImpError, ValueError):
    """Vector or matrix shapes are inconsistent."""


class RouteUnavailable(FracImpError, ValueError):
    """The requested evaluation route is not defined for this generator."""


class IndexOutOfRange(FracImpError, IndexError):
    """An interval or impulse index is outside the partition."""


class TimeOutsideWindow(FracImpError, ValueError):
    """A time argument falls outside the window it was requested for."""


class EmptyInterval(FracImpError, ValueError):
    """A trajectory has no samples on some subinterval."""


class HistoryIncomplete(FracImpError, RuntimeError):
    """Earlier subintervals have not been solved yet."""


class NonConvergence(FracImpError, RuntimeError):
    """An iteration stopped without meeting its tolerance.

    The attributes carry the diagnostics needed by callers that want to
    report the failure rather than abort.
    """

    def __init__(self, message: str, *, last_error: float | None = None,
                 ratio: float | None = None, payload: object = None) -> None:
        super().__init__(message)
        self.last_error = last_error
        self.ratio = ratio
        self.payload = payload


class HypothesisViolated(FracImpError, ValueError):
    """A standing hypothesis required by an operation does not hold."""


class SingularTerminalOperator(FracImpError, ArithmeticError):
    """The discretized terminal operator is rank deficient."""


class ConfigError(FracImpError, ValueError):
    """A configuration document could not be loaded or validated."""
