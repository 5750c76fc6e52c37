"""Unit tests for scenario loading."""

import json

import pytest

from kinetic_market import load_scenario, scenario_from_dict
from kinetic_market.config.constants import ModelTier
from kinetic_market.config.loader import load_schema
from kinetic_market.models.errors import ConfigError


class TestScenarioFromDict:
    """Building scenarios from parsed documents."""

    def test_single_market(self, single_doc):
        scenario = scenario_from_dict(single_doc)
        assert scenario.model_tier is ModelTier.SINGLE
        assert scenario.name == "box-single"
        assert scenario.market.v_plus == -1.0
        assert scenario.numerics.dt == 0.0004
        assert scenario.numerics.seeds == [0]
        assert scenario.r_max() == pytest.approx(1.0 + 2.0 + 0.5)

    def test_explicit_r_max(self, single_doc):
        single_doc["numerics"]["r_max"] = 2.0
        assert scenario_from_dict(single_doc).r_max() == 2.0

    def test_network(self, network_doc):
        scenario = scenario_from_dict(network_doc)
        assert scenario.network.size == 2
        assert len(scenario.initial_network) == 2
        assert set(scenario.network.routing_minus_plus) == {(0, 1), (1, 0)}
        assert len(scenario.markets) == 2

    def test_free(self, free_doc):
        scenario = scenario_from_dict(free_doc)
        assert scenario.free.nx == 240
        assert scenario.markets == ()

    def test_round_trip_through_to_dict(self, recycling_doc):
        scenario = scenario_from_dict(recycling_doc)
        again = scenario_from_dict(scenario.to_dict())
        assert again.market == scenario.market
        assert again.numerics == scenario.numerics

    def test_schema_violation(self, single_doc):
        del single_doc["market"]
        with pytest.raises(ConfigError) as info:
            scenario_from_dict(single_doc)
        assert "malformed" in info.value.message
        assert info.value.violations

    def test_unparseable_block(self, single_doc):
        single_doc["market"]["lambda_plus"] = {"breakpoints": [1.0, 0.0], "values": [1.0, 0.0]}
        with pytest.raises(ConfigError) as info:
            scenario_from_dict(single_doc)
        assert any(v.field == "market" for v in info.value.violations)

    def test_invariant_violation(self, single_doc):
        single_doc["numerics"]["dt"] = 0.01
        with pytest.raises(ConfigError, match="invariants"):
            scenario_from_dict(single_doc)

    def test_replica_seeds_extend_upward(self, single_doc):
        single_doc["numerics"].update({"seeds": [4, 9], "replicas": 4})
        assert scenario_from_dict(single_doc).numerics.replica_seeds() == [4, 9, 10, 11]


class TestLoadScenario:
    """Reading scenario files."""

    def test_load(self, single_doc, write_scenario):
        scenario = load_scenario(write_scenario(single_doc))
        assert scenario.market is not None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Cannot read"):
            load_scenario(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"name": "x",\n "model_tier": }')
        with pytest.raises(ConfigError) as info:
            load_scenario(str(path))
        detail = info.value.violations[0]
        assert detail.error_type == "INVALID_JSON"
        assert detail.field.startswith("line 2")

    def test_shipped_scenarios_load(self):
        import glob
        import os

        from tests.conftest import SCENARIO_DIR

        paths = sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.json")))
        assert paths
        for path in paths:
            load_scenario(path)

    def test_schema_is_packaged(self):
        schema = load_schema()
        assert "model_tier" in json.dumps(schema)
