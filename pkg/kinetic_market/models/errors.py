"""Error model definitions for the kinetic market laboratory."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional


class ErrorSeverity(Enum):
    """Error severity levels."""
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


@dataclass
class ErrorDetail:
    """A single invariant violation found while validating inputs."""
    severity: ErrorSeverity
    message: str
    error_type: Optional[str] = None
    field: Optional[str] = None

    def format_message(self) -> str:
        """Format the violation with its location."""
        location = self.field if self.field else "scenario"
        return f"{self.severity.value} at {location}: {self.message}"


class KineticError(Exception):
    """Base exception raised by the laboratory's engines and solvers."""

    error_type = "KINETIC_ERROR"

    def __init__(self, message: str, error_type: str = None, **context: Any):
        self.message = message
        if error_type:
            self.error_type = error_type
        self.context: Dict[str, Any] = context
        super().__init__(message)

    def __str__(self):
        parts = [f"{key}={value}" for key, value in self.context.items()]
        parts.append(self.error_type)
        location = ", ".join(parts)
        return f"Error at {location}: {self.message}"


class NonConvergence(KineticError):
    """Adaptive quadrature hit its subdivision limit."""
    error_type = "NON_CONVERGENCE"


class DomainViolation(KineticError):
    """A characteristic leaves the interval or no interior cell remains."""
    error_type = "DOMAIN_VIOLATION"


class CflViolation(KineticError):
    """An explicit step would violate the stability bound."""
    error_type = "CFL_VIOLATION"

    def __init__(self, message: str, market: Optional[int] = None, **context: Any):
        if market is not None:
            context["market"] = market
        self.market = market
        super().__init__(message, **context)


class EmptyPlusPhase(KineticError):
    """The (+)-phase is empty, so the boundary is undefined."""
    error_type = "EMPTY_PLUS_PHASE"


class NoMassAtBoundary(KineticError):
    """Both boundary velocity profiles vanish identically."""
    error_type = "NO_MASS_AT_BOUNDARY"


class RecyclingTooStrong(KineticError):
    """A recycling constant alpha reached 1."""
    error_type = "RECYCLING_TOO_STRONG"


class RootSelectionAmbiguous(KineticError):
    """The boundary quadratic does not have exactly one admissible root."""
    error_type = "ROOT_SELECTION_AMBIGUOUS"


class NegativeGamma(KineticError):
    """A stationary boundary density came out negative."""
    error_type = "NEGATIVE_GAMMA"


class SubstochasticityViolated(KineticError):
    """Routing matrices are not substochastic."""
    error_type = "SUBSTOCHASTICITY_VIOLATED"


class InequalitiesViolated(KineticError):
    """A supplied network parameter vector does not satisfy the inequalities."""
    error_type = "INEQUALITIES_VIOLATED"


class BelowCritical(KineticError):
    """A boundary density is below its critical value."""
    error_type = "BELOW_CRITICAL"

    def __init__(self, message: str, phase: str, **context: Any):
        self.phase = phase
        super().__init__(message, phase=phase, **context)


class ConfigError(KineticError):
    """A scenario failed validation; carries every violation found."""
    error_type = "CONFIG_ERROR"

    def __init__(self, message: str, violations: List[ErrorDetail] = None):
        self.violations: List[ErrorDetail] = list(violations or [])
        super().__init__(message)

    def __str__(self):
        lines = [f"Error at scenario, {self.error_type}: {self.message}"]
        lines.extend(f"  - {v.format_message()}" for v in self.violations)
        return "\n".join(lines)

