"""Pytest configuration and fixtures for kinetic market tests."""

import copy
import json
import os

import pytest

from kinetic_market import Laboratory
from kinetic_market.models.data import CompactRateFunction, InitialDensity, MarketParams, NetworkSpec

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")

BOX = {"breakpoints": [0.0, 0.9999999999, 1.0], "values": [1.0, 1.0, 0.0]}
ZERO = {"breakpoints": [0.0, 1.0], "values": [0.0, 0.0]}
RAMP = {"breakpoints": [0.0, 1.0], "values": [1.0, 0.0]}


def box_rate(height: float = 1.0) -> CompactRateFunction:
    return CompactRateFunction.box(height, 1.0)


def make_box_market(**kernels) -> MarketParams:
    """v = -1 / +1, unit boxes of arrivals on [0, 1], no deaths."""
    return MarketParams(
        v_plus=-1.0,
        v_minus=1.0,
        lambda_plus=box_rate(),
        lambda_minus=box_rate(),
        mu_plus=CompactRateFunction.zero(),
        mu_minus=CompactRateFunction.zero(),
        **kernels,
    )


def market_doc(**overrides) -> dict:
    doc = {
        "v_plus": -1.0,
        "v_minus": 1.0,
        "lambda_plus": BOX,
        "lambda_minus": BOX,
        "mu_plus": ZERO,
        "mu_minus": ZERO,
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def box_market():
    """Box-rate single market with gamma_cr = 1."""
    return make_box_market()


@pytest.fixture
def recycling_market():
    """Box market recycling 0.4 into (+) and 0.2 into (-)."""
    return make_box_market(p_minus_plus=box_rate(0.4), p_plus_minus=box_rate(0.2))


@pytest.fixture
def ramp_initial():
    """rho = 1 - r on [0, 1] for both phases: the box market's critical fixed point."""
    ramp = CompactRateFunction.ramp(1.0, 1.0)
    return InitialDensity(ramp, ramp, 0.0)


@pytest.fixture
def mirrored_network():
    """Two identical box markets routing 0.3 of their annihilations into each other's (+)-phase."""
    kernel = box_rate(0.3)
    return NetworkSpec(
        (make_box_market(), make_box_market()),
        routing_minus_plus={(0, 1): kernel, (1, 0): kernel},
    )


@pytest.fixture
def single_doc():
    """Scenario document of the box market."""
    return {
        "name": "box-single",
        "model_tier": "single",
        "market": market_doc(),
        "initial": {"rho_plus": RAMP, "rho_minus": RAMP, "b0": 0.0},
        "numerics": {"dr": 0.001, "dt": 0.0004, "T": 1.0},
    }


@pytest.fixture
def recycling_doc(single_doc):
    doc = copy.deepcopy(single_doc)
    doc["name"] = "box-recycling"
    doc["model_tier"] = "recycling"
    doc["market"]["p_minus_plus"] = {"breakpoints": [0.0, 0.9999999999, 1.0], "values": [0.4, 0.4, 0.0]}
    doc["market"]["p_plus_minus"] = {"breakpoints": [0.0, 0.9999999999, 1.0], "values": [0.2, 0.2, 0.0]}
    return doc


@pytest.fixture
def network_doc():
    kernel = {"breakpoints": [0.0, 0.9999999999, 1.0], "values": [0.3, 0.3, 0.0]}
    initial = {"rho_plus": RAMP, "rho_minus": RAMP, "b0": 0.0}
    return {
        "name": "two-market-network",
        "model_tier": "network",
        "network": {
            "markets": [market_doc(), market_doc()],
            "routing": [
                {"kind": "minus_plus", "source": 0, "target": 1, "kernel": kernel},
                {"kind": "minus_plus", "source": 1, "target": 0, "kernel": kernel},
            ],
        },
        "initial_network": [initial, copy.deepcopy(initial)],
        "numerics": {"dr": 0.001, "dt": 0.0004, "T": 1.0},
    }


@pytest.fixture
def free_doc():
    return {
        "name": "free-bump",
        "model_tier": "free",
        "free": {
            "interval": [-6.0, 6.0],
            "v_bound": 1.0,
            "nx": 240,
            "nv": 8,
            "f0": {"breakpoints": [0.0, 1.5], "values": [1.0, 0.0]},
            "mu": {"breakpoints": [0.0, 3.0], "values": [0.5, 0.0]},
        },
        "numerics": {"dt": 0.025, "T": 1.0, "seeds": [7]},
    }


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario document to a temporary JSON file and return its path."""
    def write(doc: dict, name: str = "scenario.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


@pytest.fixture
def lab():
    """Fixture providing a Laboratory instance."""
    return Laboratory()
