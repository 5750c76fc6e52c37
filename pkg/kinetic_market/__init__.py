"""Kinetic Market - a laboratory for two-phase kinetic models of a limit order book."""

__version__ = "0.1.0"

from kinetic_market.config.loader import load_scenario, scenario_from_dict
from kinetic_market.core.laboratory import Laboratory, LabResult
from kinetic_market.models.data import (
    CompactRateFunction,
    InitialDensity,
    MarketParams,
    NetworkSpec,
    VelocityProfile,
)
from kinetic_market.models.errors import (
    ConfigError,
    ErrorDetail,
    ErrorSeverity,
    KineticError,
)
from kinetic_market.models.scenario import Scenario

__all__ = [
    "Laboratory",
    "LabResult",
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "CompactRateFunction",
    "InitialDensity",
    "MarketParams",
    "NetworkSpec",
    "VelocityProfile",
    "ConfigError",
    "ErrorDetail",
    "ErrorSeverity",
    "KineticError",
]
