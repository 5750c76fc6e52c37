"""Unit tests for manifests, CSV export, error formatting and logging setup."""

import json
import logging
import math

import numpy as np
import pytest

from kinetic_market import __version__
from kinetic_market.models.errors import CflViolation, ConfigError, ErrorDetail, ErrorSeverity
from kinetic_market.utils.csv_export import read_rows, write_rows
from kinetic_market.utils.error_formatter import (
    format_error_message,
    format_parse_error,
    format_violations,
)
from kinetic_market.utils.logging_setup import configure_logging
from kinetic_market.utils.manifest import RunManifest, config_hash, jsonable, write_json


class TestManifest:
    """Provenance records."""

    def test_config_hash_ignores_key_order(self):
        a = {"name": "x", "numerics": {"dr": 0.1, "dt": 0.05}}
        b = {"numerics": {"dt": 0.05, "dr": 0.1}, "name": "x"}
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64

    def test_config_hash_changes_with_values(self):
        assert config_hash({"dt": 0.1}) != config_hash({"dt": 0.2})

    def test_write(self, tmp_path):
        manifest = RunManifest("simulate", "box", "abc", seeds=[1, 2], artifacts=["b.csv", "a.csv"])
        path = manifest.finish().write(str(tmp_path / "run"))
        with open(path) as handle:
            data = json.load(handle)
        assert data["seeds"] == [1, 2]
        assert data["artifacts"] == ["a.csv", "b.csv"]
        assert data["versions"]["kinetic_market"] == __version__
        assert data["wall_time"] >= 0.0
        assert data["tolerances"]["CFL_LIMIT"] == 0.9
        assert data["tolerances"]["QUAD_TOL"] == 1e-10
        assert data["tolerances"]["MAX_ITERATIONS"] == 10**6

    def test_jsonable(self):
        value = jsonable({"a": np.float64(1.5), "b": (np.int64(2), math.inf), "c": np.bool_(True)})
        assert value == {"a": 1.5, "b": [2, "inf"], "c": True}
        json.dumps(value)

    def test_write_json_handles_non_finite(self, tmp_path):
        path = write_json(str(tmp_path / "report.json"), {"mass": math.inf, "beta": -0.5})
        with open(path) as handle:
            assert json.load(handle) == {"beta": -0.5, "mass": "inf"}


class TestCsvExport:
    """CSV writers."""

    def test_write_and_read(self, tmp_path):
        path = write_rows(str(tmp_path / "out" / "series.csv"), ("t", "b"), [(0.0, 1.0), (0.5, 1.25)])
        rows = read_rows(path)
        assert rows == [{"t": "0.0", "b": "1.0"}, {"t": "0.5", "b": "1.25"}]

    def test_header_only(self, tmp_path):
        path = write_rows(str(tmp_path / "empty.csv"), ("x",), [])
        with open(path) as handle:
            assert handle.read().strip() == "x"


class TestErrorFormatting:
    """User-facing error text."""

    def test_message_with_location(self):
        text = format_error_message("dt too large", field="numerics.dt", error_type="CFL_VIOLATION")
        assert text == "Error at numerics.dt, CFL_VIOLATION: dt too large"

    def test_message_with_hint(self):
        text = format_error_message("bad", hint="lower dt")
        assert text.startswith("Error at scenario: bad")
        assert text.endswith("Hint: lower dt")

    def test_parse_error(self):
        content = '{\n  "a": ,\n}'
        try:
            json.loads(content)
        except json.JSONDecodeError as exc:
            detail = format_parse_error(exc, content)
        assert detail.error_type == "INVALID_JSON"
        assert detail.field.startswith("line 2")
        assert '"a": ,' in detail.message

    def test_violations_errors_first(self):
        warning = ErrorDetail(ErrorSeverity.WARNING, "slow", field="numerics")
        error = ErrorDetail(ErrorSeverity.ERROR, "broken", "INVALID_GRID", "free.nx")
        lines = format_violations([warning, error]).splitlines()
        assert lines == ["ERROR at free.nx: broken", "WARNING at numerics: slow"]

    def test_kinetic_error_text(self):
        error = CflViolation("step too large", market=1)
        assert str(error) == "Error at market=1, CFL_VIOLATION: step too large"

    def test_config_error_keeps_violations(self):
        detail = ErrorDetail(ErrorSeverity.ERROR, "missing", "MISSING_FIELD", "market")
        error = ConfigError("invalid", [detail])
        assert error.violations == [detail]
        assert "invalid" in str(error)


class TestLogging:
    """Root logger configuration."""

    def test_verbose_forces_debug(self):
        assert configure_logging(verbose=True) == logging.DEBUG

    def test_environment_level(self, monkeypatch):
        monkeypatch.setenv("KM_LOG", "info")
        assert configure_logging() == logging.INFO

    def test_unknown_level_falls_back(self):
        assert configure_logging(level="chatty") == logging.WARNING

    @pytest.fixture(autouse=True)
    def restore_root_level(self):
        level = logging.getLogger().level
        yield
        logging.getLogger().setLevel(level)
