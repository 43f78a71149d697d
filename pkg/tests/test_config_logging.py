"""Tests for tolerances, environment settings, logging and document kinds."""

import io
import logging

import pytest

from utils.config import DEFAULT_TOLERANCES, Settings, Tolerances
from utils.constants import DocumentKind
from utils.logging_config import ColoredFormatter, get_logger, set_log_level, setup_logging


class TestTolerances:
    def test_scaled_multiplies_every_field(self):
        loose = Tolerances().scaled(10.0)
        assert loose.flow_residual == pytest.approx(DEFAULT_TOLERANCES.flow_residual * 10.0)
        assert loose.pivot == pytest.approx(DEFAULT_TOLERANCES.pivot * 10.0)
        assert loose.extreme == pytest.approx(DEFAULT_TOLERANCES.extreme * 10.0)

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            Tolerances().scaled(0.0)


class TestSettings:
    def test_reads_environment(self, monkeypatch):
        monkeypatch.setenv("CMIX_LOG_LEVEL", "debug")
        monkeypatch.setenv("CMIX_WORKERS", "3")
        monkeypatch.setenv("CMIX_TOL_SCALE", "100")
        settings = Settings.from_environment()
        assert settings == Settings(log_level="DEBUG", workers=3, tolerance_scale=100.0)
        assert settings.tolerances().feasibility == pytest.approx(DEFAULT_TOLERANCES.feasibility * 100.0)

    def test_malformed_values_fall_back(self, monkeypatch):
        monkeypatch.setenv("CMIX_WORKERS", "many")
        monkeypatch.setenv("CMIX_TOL_SCALE", "-1")
        settings = Settings.from_environment()
        assert settings.workers == 1
        assert settings.tolerance_scale == 1.0


class TestLogging:
    def test_loggers_live_under_the_application_namespace(self):
        assert get_logger("processors.simplex").name == "cmix.processors.simplex"
        assert get_logger("cmix.core").name == "cmix.core"

    def test_records_reach_the_configured_stream(self):
        stream = io.StringIO()
        setup_logging(logging.INFO, use_colors=False, stream=stream)
        get_logger("tests").info("pivoting")
        get_logger("tests").debug("hidden")
        output = stream.getvalue()
        assert "pivoting" in output
        assert "hidden" not in output

    def test_set_log_level(self):
        stream = io.StringIO()
        logger = setup_logging(logging.WARNING, use_colors=False, stream=stream)
        set_log_level(logger, logging.DEBUG)
        get_logger("tests").debug("visible now")
        assert "visible now" in stream.getvalue()

    def test_colored_formatter_restores_level_name(self):
        record = logging.LogRecord("cmix", logging.ERROR, __file__, 1, "boom", None, None)
        text = ColoredFormatter("%(levelname)s %(message)s").format(record)
        assert "\033[31m" in text
        assert record.levelname == "ERROR"


def test_document_kind_lookup():
    assert DocumentKind.from_value("mixed") is DocumentKind.MIXED
    with pytest.raises(ValueError):
        DocumentKind.from_value("policy")
