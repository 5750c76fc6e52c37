"""Scenario validation: document structure, tier consistency and step sizes."""

from typing import Any, List, Mapping

from ..config.constants import CFL_LIMIT, MIN_VELOCITY_SLICES, TIER_ORDER, ModelTier
from ..models.errors import ErrorDetail, ErrorSeverity
from ..models.scenario import Scenario
from .market_validator import MarketValidator


def _error(message: str, error_type: str, field: str = None) -> ErrorDetail:
    return ErrorDetail(severity=ErrorSeverity.ERROR, message=message, error_type=error_type, field=field)


class ScenarioValidator:
    """Validator for scenario documents and parsed scenarios."""

    @staticmethod
    def validate_document(doc: Any, schema: Mapping[str, Any]) -> List[ErrorDetail]:
        """
        Check a raw scenario document against the schema.

        Args:
            doc: Parsed JSON document
            schema: Parsed scenario schema

        Returns:
            List of ErrorDetail objects (empty if the document can be parsed)
        """
        if not isinstance(doc, dict):
            return [_error("Scenario must be a JSON object", "INVALID_DOCUMENT")]

        tier = doc.get("model_tier")
        if tier not in schema["tiers"]:
            supported = ", ".join(schema["tiers"])
            return [_error(f"model_tier must be one of {supported}, got {tier!r}",
                           "INVALID_TIER", "model_tier")]

        errors = []
        for name in schema["required"][tier]:
            if name not in doc:
                errors.append(_error(f"{name} is required for tier {tier}", "MISSING_FIELD", name))
        for name in schema["forbidden"][tier]:
            if name in doc:
                errors.append(_error(f"{name} is not allowed for tier {tier}", "TIER_MISMATCH", name))

        markets: List[tuple] = []
        if isinstance(doc.get("market"), dict):
            markets.append(("market", doc["market"]))
        network = doc.get("network")
        if isinstance(network, dict):
            for m, market in enumerate(network.get("markets") or []):
                markets.append((f"network.markets[{m}]", market))
        for prefix, market in markets:
            errors.extend(ScenarioValidator._validate_market_document(prefix, market, schema))

        numerics = doc.get("numerics")
        if numerics is not None:
            errors.extend(ScenarioValidator._validate_numerics_document(numerics, schema))

        criteria = (doc.get("validation") or {}).get("criteria", [])
        for name in criteria:
            if name not in schema["criteria"]:
                errors.append(_error(f"Unknown validation criterion {name!r}",
                                     "UNKNOWN_CRITERION", "validation.criteria"))
        return errors

    @staticmethod
    def _validate_market_document(prefix: str, market: Any, schema: Mapping[str, Any]) -> List[ErrorDetail]:
        if not isinstance(market, dict):
            return [_error("Market must be a JSON object", "INVALID_DOCUMENT", prefix)]
        errors = []
        for name in schema["market"]["required"]:
            if name not in market:
                errors.append(_error(f"{name} is required", "MISSING_FIELD", f"{prefix}.{name}"))
        rate_fields = schema["rate_function"]["required"]
        for name, value in market.items():
            if name.startswith(("lambda_", "mu_", "p_")) and value is not None:
                if not isinstance(value, dict) or any(k not in value for k in rate_fields):
                    errors.append(_error("Rate function needs breakpoints and values",
                                         "INVALID_RATE", f"{prefix}.{name}"))
        return errors

    @staticmethod
    def _validate_numerics_document(numerics: Any, schema: Mapping[str, Any]) -> List[ErrorDetail]:
        if not isinstance(numerics, dict):
            return [_error("numerics must be a JSON object", "INVALID_DOCUMENT", "numerics")]
        rules = schema["numerics"]
        errors = []
        for name in rules["positive"]:
            value = numerics.get(name)
            if value is not None and (not isinstance(value, (int, float)) or value <= 0):
                errors.append(_error(f"{name} must be a positive number, got {value!r}",
                                     "INVALID_NUMERICS", f"numerics.{name}"))
        for name in rules["positive_int"]:
            value = numerics.get(name)
            if value is not None and (not isinstance(value, int) or value < 1):
                errors.append(_error(f"{name} must be a positive integer, got {value!r}",
                                     "INVALID_NUMERICS", f"numerics.{name}"))
        for name in rules["nonnegative_int"]:
            value = numerics.get(name)
            if value is not None and (not isinstance(value, int) or value < 0):
                errors.append(_error(f"{name} must be a nonnegative integer, got {value!r}",
                                     "INVALID_NUMERICS", f"numerics.{name}"))
        return errors

    @staticmethod
    def validate_scenario(scenario: Scenario) -> List[ErrorDetail]:
        """
        Check a parsed scenario: parameter invariants, kernels consistent
        with the tier, and step sizes admissible for the explicit schemes.

        Returns:
            List of ErrorDetail objects (empty if valid)
        """
        errors: List[ErrorDetail] = []
        tier = scenario.model_tier

        if scenario.market is not None:
            errors.extend(MarketValidator.validate_market(scenario.market, prefix="market."))
            errors.extend(ScenarioValidator._validate_kernels(scenario))
        if scenario.network is not None:
            errors.extend(MarketValidator.validate_network(scenario.network))
            for m, market in enumerate(scenario.network.markets):
                if market.has_recycling:
                    errors.append(_error(
                        "Network markets recycle through routing entries, not their own kernels",
                        "TIER_MISMATCH", f"network.markets[{m}]",
                    ))
            if len(scenario.initial_network) != scenario.network.size:
                errors.append(_error(
                    f"initial_network has {len(scenario.initial_network)} entries "
                    f"for {scenario.network.size} markets",
                    "MISSING_FIELD", "initial_network",
                ))

        if TIER_ORDER[tier] > 0 and not errors:
            errors.extend(ScenarioValidator.validate_steps(scenario))
        if tier is ModelTier.FREE and scenario.free is not None:
            errors.extend(ScenarioValidator._validate_free(scenario))
        return errors

    @staticmethod
    def _validate_kernels(scenario: Scenario) -> List[ErrorDetail]:
        has_kernels = scenario.market.has_recycling
        if scenario.model_tier is ModelTier.SINGLE and has_kernels:
            return [_error("Recycling kernels require tier recycling", "TIER_MISMATCH", "market")]
        if scenario.model_tier is ModelTier.RECYCLING and not has_kernels:
            return [_error("Tier recycling needs p_plus_minus or p_minus_plus", "TIER_MISMATCH", "market")]
        return []

    @staticmethod
    def validate_steps(scenario: Scenario) -> List[ErrorDetail]:
        """
        Precompute the stability bounds of the fluid scheme.

        The relative speeds |v -/+ beta| never exceed v_minus - v_plus, so
        (v_minus - v_plus) dt <= CFL_LIMIT dr guarantees every step's
        Courant condition; dt * max mu <= CFL_LIMIT keeps deaths explicit.
        """
        n = scenario.numerics
        errors = []
        weight = 1.5 if n.boundary_extrapolation else 1.0
        for m, market in enumerate(scenario.markets):
            field = "market" if scenario.network is None else f"network.markets[{m}]"
            speed = market.v_minus - market.v_plus
            if weight * speed * n.dt > CFL_LIMIT * n.dr:
                errors.append(_error(
                    f"dt={n.dt:.3g} too large: (v_minus - v_plus)*dt = {speed * n.dt:.3g} "
                    f"exceeds {CFL_LIMIT}*dr/{weight:g} = {CFL_LIMIT * n.dr / weight:.3g}",
                    "CFL_VIOLATION", f"numerics.dt ({field})",
                ))
            mu_max = max(max(market.mu_plus.values), max(market.mu_minus.values))
            if mu_max * n.dt > CFL_LIMIT:
                errors.append(_error(
                    f"dt*max(mu) = {mu_max * n.dt:.3g} exceeds {CFL_LIMIT}",
                    "CFL_VIOLATION", f"numerics.dt ({field})",
                ))
            elif weight * speed * n.dt / n.dr + mu_max * n.dt > 1.0:
                errors.append(_error(
                    f"dt={n.dt:.3g} can turn densities negative: advection and deaths "
                    f"together remove more than a cell's mass per step",
                    "CFL_VIOLATION", f"numerics.dt ({field})",
                ))
        return errors

    @staticmethod
    def _validate_free(scenario: Scenario) -> List[ErrorDetail]:
        free, n = scenario.free, scenario.numerics
        errors = []
        lo, hi = free.interval
        if hi <= lo or free.nx < 2:
            errors.append(_error("Free interval must be nonempty with at least two cells",
                                 "INVALID_GRID", "free.interval"))
            return errors
        if free.v_bound <= 0.0:
            errors.append(_error("v_bound must be positive", "INVALID_GRID", "free.v_bound"))
            return errors
        if free.nv < MIN_VELOCITY_SLICES:
            errors.append(_error(
                f"nv must be at least {MIN_VELOCITY_SLICES}, got {free.nv}",
                "INVALID_GRID", "free.nv",
            ))
        dx = (hi - lo) / free.nx
        if free.v_bound * n.dt > CFL_LIMIT * dx:
            errors.append(_error(
                f"V0*dt = {free.v_bound * n.dt:.3g} exceeds {CFL_LIMIT}*dx = {CFL_LIMIT * dx:.3g}",
                "CFL_VIOLATION", "numerics.dt",
            ))
        if free.v_bound * n.T >= 0.5 * (hi - lo):
            errors.append(_error(
                f"Horizon T={n.T} leaves no interior cell on {free.interval} at V0={free.v_bound}",
                "DOMAIN_VIOLATION", "numerics.T",
            ))
        return errors


def validate_scenario(scenario: Scenario) -> List[ErrorDetail]:
    """Return all violations of a parsed scenario (empty list means ok)."""
    return ScenarioValidator.validate_scenario(scenario)
