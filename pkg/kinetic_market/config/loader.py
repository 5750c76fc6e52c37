"""Load scenario files into validated Scenario objects."""

import json
import logging
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, List, Mapping

from ..models.data import InitialDensity, MarketParams, NetworkSpec
from ..models.errors import ConfigError, ErrorDetail, ErrorSeverity
from ..models.scenario import FreeSetup, Numerics, Outputs, Scenario, Validation
from ..utils.error_formatter import format_parse_error
from ..validators.scenario_validator import ScenarioValidator
from .constants import ModelTier

logger = logging.getLogger(__name__)

SCHEMA_FILE = "scenario_schema.json"


@lru_cache(maxsize=1)
def load_schema() -> Dict[str, Any]:
    """The scenario schema shipped with the package."""
    text = resources.files(__package__).joinpath(SCHEMA_FILE).read_text(encoding="utf-8")
    return json.loads(text)


def _parse_block(errors: List[ErrorDetail], name: str, build, *args):
    try:
        return build(*args)
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(ErrorDetail(
            severity=ErrorSeverity.ERROR,
            message=f"Cannot parse {name}: {exc}",
            error_type="INVALID_VALUE",
            field=name,
        ))
        return None


def scenario_from_dict(doc: Mapping[str, Any], name: str = "scenario") -> Scenario:
    """
    Build and validate a Scenario from a parsed document.

    Args:
        doc: Parsed scenario document
        name: Fallback scenario name

    Returns:
        Validated Scenario

    Raises:
        ConfigError: Carrying every violation found
    """
    errors = ScenarioValidator.validate_document(doc, load_schema())
    if errors:
        raise ConfigError(f"Scenario {name!r} is malformed", errors)

    tier = ModelTier(doc["model_tier"])
    market = network = free = initial = None
    initial_network: List[InitialDensity] = []
    if "market" in doc:
        market = _parse_block(errors, "market", MarketParams.from_dict, doc["market"])
    if "network" in doc:
        network = _parse_block(errors, "network", NetworkSpec.from_dict, doc["network"])
    if "free" in doc:
        free = _parse_block(errors, "free", FreeSetup.from_dict, doc["free"])
    if "initial" in doc:
        initial = _parse_block(errors, "initial", InitialDensity.from_dict, doc["initial"])
    for m, entry in enumerate(doc.get("initial_network", [])):
        parsed = _parse_block(errors, f"initial_network[{m}]", InitialDensity.from_dict, entry)
        if parsed is not None:
            initial_network.append(parsed)
    numerics = _parse_block(errors, "numerics", Numerics.from_dict, doc.get("numerics", {}))
    outputs = _parse_block(errors, "outputs", Outputs.from_dict, doc.get("outputs", {}))
    validation = _parse_block(errors, "validation", Validation.from_dict, doc.get("validation", {}))
    if errors:
        raise ConfigError(f"Scenario {name!r} has invalid values", errors)

    scenario = Scenario(
        model_tier=tier,
        name=str(doc.get("name", name)),
        market=market,
        network=network,
        free=free,
        initial=initial,
        initial_network=initial_network,
        numerics=numerics,
        outputs=outputs,
        validation=validation,
        raw=dict(doc),
    )
    violations = ScenarioValidator.validate_scenario(scenario)
    for warning in (v for v in violations if v.severity is not ErrorSeverity.ERROR):
        logger.warning(warning.format_message())
    failures = [v for v in violations if v.severity is ErrorSeverity.ERROR]
    if failures:
        raise ConfigError(f"Scenario {scenario.name!r} violates model invariants", failures)
    return scenario


def load_scenario(path: str) -> Scenario:
    """
    Read a JSON scenario file.

    Raises:
        ConfigError: If the file is missing, not JSON, or invalid
    """
    try:
        with open(path, encoding="utf-8") as handle:
            content = handle.read()
    except OSError as exc:
        raise ConfigError(f"Cannot read scenario {path}: {exc.strerror or exc}")
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Scenario {path} is not valid JSON", [format_parse_error(exc, content)])
    logger.debug("Loaded scenario document from %s", path)
    return scenario_from_dict(doc, name=path)
