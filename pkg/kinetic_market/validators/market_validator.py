"""Invariant checks for market and network parameters."""

import math
from typing import List, Optional

from ..models.data import CompactRateFunction, MarketParams, NetworkSpec
from ..models.errors import ErrorDetail, ErrorSeverity

# Slack for comparing integrated kernel masses against 1
MASS_SLACK = 1e-12

REQUIRED_RATES = ("lambda_plus", "lambda_minus", "mu_plus", "mu_minus")


class MarketValidator:
    """Validator for MarketParams and NetworkSpec invariants."""

    @staticmethod
    def validate_market(params: MarketParams, prefix: str = "") -> List[ErrorDetail]:
        """
        Check every MarketParams invariant.

        Args:
            params: Market to check
            prefix: Field-name prefix used when the market is part of a network

        Returns:
            List of ErrorDetail objects (empty if valid)
        """
        errors = []

        if not math.isfinite(params.v_plus) or params.v_plus >= 0.0:
            errors.append(ErrorDetail(
                severity=ErrorSeverity.ERROR,
                message=f"v_plus must be negative, got {params.v_plus}",
                error_type="INVALID_VELOCITY",
                field=f"{prefix}v_plus",
            ))
        if not math.isfinite(params.v_minus) or params.v_minus <= 0.0:
            errors.append(ErrorDetail(
                severity=ErrorSeverity.ERROR,
                message=f"v_minus must be positive, got {params.v_minus}",
                error_type="INVALID_VELOCITY",
                field=f"{prefix}v_minus",
            ))

        for name in REQUIRED_RATES:
            if not isinstance(getattr(params, name), CompactRateFunction):
                errors.append(ErrorDetail(
                    severity=ErrorSeverity.ERROR,
                    message=f"{name} is required",
                    error_type="MISSING_RATE",
                    field=f"{prefix}{name}",
                ))

        for name in ("p_plus_minus", "p_minus_plus"):
            error = MarketValidator._kernel_mass_error(getattr(params, name), f"{prefix}{name}")
            if error:
                errors.append(error)

        return errors

    @staticmethod
    def validate_network(spec: NetworkSpec) -> List[ErrorDetail]:
        """
        Check per-market invariants and the routing normalization.

        Returns:
            List of ErrorDetail objects (empty if valid)
        """
        errors = []
        if spec.size == 0:
            errors.append(ErrorDetail(
                severity=ErrorSeverity.ERROR,
                message="Network must contain at least one market",
                error_type="EMPTY_NETWORK",
                field="markets",
            ))
        for m, market in enumerate(spec.markets):
            errors.extend(MarketValidator.validate_market(market, prefix=f"markets[{m}]."))

        for kind, table in (("minus_plus", spec.routing_minus_plus),
                            ("plus_minus", spec.routing_plus_minus)):
            row_mass = [0.0] * spec.size
            for (k, m), kernel in table.items():
                if not (0 <= k < spec.size and 0 <= m < spec.size):
                    errors.append(ErrorDetail(
                        severity=ErrorSeverity.ERROR,
                        message=f"Routing pair ({k}, {m}) refers to a missing market",
                        error_type="INVALID_ROUTING",
                        field=f"routing.{kind}",
                    ))
                    continue
                row_mass[k] += kernel.total()
            for k, mass in enumerate(row_mass):
                if mass > 1.0 + MASS_SLACK:
                    errors.append(ErrorDetail(
                        severity=ErrorSeverity.ERROR,
                        message=f"recycling mass exceeds 1: routed {kind} mass of market {k} is {mass:.6g}",
                        error_type="RECYCLING_MASS",
                        field=f"routing.{kind}[{k}]",
                    ))
        return errors

    @staticmethod
    def _kernel_mass_error(kernel: Optional[CompactRateFunction], name: str) -> Optional[ErrorDetail]:
        if kernel is None:
            return None
        mass = kernel.total()
        if mass > 1.0 + MASS_SLACK:
            return ErrorDetail(
                severity=ErrorSeverity.ERROR,
                message=f"recycling mass exceeds 1: integral of {name} is {mass:.6g}",
                error_type="RECYCLING_MASS",
                field=name,
            )
        return None


def validate_market(params: MarketParams) -> List[ErrorDetail]:
    """Return all invariant violations of a market (empty list means ok)."""
    return MarketValidator.validate_market(params)


def validate_network(spec: NetworkSpec) -> List[ErrorDetail]:
    """Return all invariant violations of a network (empty list means ok)."""
    return MarketValidator.validate_network(spec)
