"""Kinetic market data models."""

from .data import (
    CompactRateFunction,
    InitialDensity,
    MarketParams,
    NetworkSpec,
    VelocityProfile,
)

from .errors import (
    ErrorSeverity,
    ErrorDetail,
    KineticError,
    ConfigError,
)

__all__ = [
    "CompactRateFunction",
    "InitialDensity",
    "MarketParams",
    "NetworkSpec",
    "VelocityProfile",
    "ErrorSeverity",
    "ErrorDetail",
    "KineticError",
    "ConfigError",
]
