"""Configuration module for the kinetic market laboratory."""

from .constants import (
    CFL_LIMIT,
    EPS_BOUNDARY,
    QUAD_TOL,
    EngineKind,
    EquilibriumKind,
    ExitCode,
    ModelTier,
    Phase,
)

__all__ = [
    "CFL_LIMIT",
    "EPS_BOUNDARY",
    "QUAD_TOL",
    "EngineKind",
    "EquilibriumKind",
    "ExitCode",
    "ModelTier",
    "Phase",
]
