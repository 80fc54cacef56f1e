"""Simulation and steering of Riemann-Liouville fractional evolution
systems with non-instantaneous impulses."""

from fracimp.errors import (
    AccuracyLoss,
    ConfigError,
    DimensionMismatch,
    EmptyInterval,
    FracImpError,
    HistoryIncomplete,
    HypothesisViolated,
    IndexOutOfRange,
    NonConvergence,
    OrderOutOfRange,
    QuadratureFailure,
    RouteUnavailable,
    SingularTerminalOperator,
    StencilUnderflow,
    TimeOutsideWindow,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyLoss",
    "ConfigError",
    "DimensionMismatch",
    "EmptyInterval",
    "FracImpError",
    "HistoryIncomplete",
    "HypothesisViolated",
    "IndexOutOfRange",
    "NonConvergence",
    "OrderOutOfRange",
    "QuadratureFailure",
    "RouteUnavailable",
    "SingularTerminalOperator",
    "StencilUnderflow",
    "TimeOutsideWindow",
]
