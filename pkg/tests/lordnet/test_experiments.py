"""
Tests for the experiment presets and their checks.
"""

import json
import math
from unittest.mock import patch

import numpy as np
import pytest

from src.lordnet.dataclasses import NsParams
from src.lordnet.errors import AcceptanceError, ConfigError
from src.lordnet.experiments import (
    PRESETS,
    Comparison,
    MetricExpectation,
    PresetScale,
    entanglement_points,
    get_preset,
    preset_names,
    run_preset,
    shift_mismatches,
    single_mode_decay,
)


class TestEntanglementQueries:
    """Test cases for the inverse-operator query helpers."""

    def test_points(self):
        """Test the four query points on a 30×30 interior."""
        assert entanglement_points(30) == [(7, 7), (7, 15), (15, 7), (15, 15)]

    def test_shifted_rows_match(self):
        """Test that circularly shifted rows have zero mismatch."""
        base = np.random.default_rng(0).standard_normal((16, 16))
        points = entanglement_points(16)
        rows = [np.roll(base, (p[0] - points[0][0], p[1] - points[0][1]), axis=(0, 1)) for p in points]
        assert shift_mismatches(rows, points) == [(0.0, 0.0)] * 3

    def test_unrelated_rows_mismatch(self):
        """Test that rows that are not shifts of each other are flagged."""
        rng = np.random.default_rng(1)
        points = entanglement_points(8)
        rows = [rng.standard_normal((8, 8)) for _ in points]
        assert all(relative > 0.1 for _, relative in shift_mismatches(rows, points))


class TestSingleModeDecay:
    """Test cases for the closed-form periodic decay check."""

    def test_fdm_and_residual_match_closed_form(self):
        """Test that one periodic step of an eigenmode decays by 1 − dt·μ/Re."""
        metrics = single_mode_decay(16, NsParams(reynolds=1000.0, dt=0.01))
        assert 0.0 < metrics["decay_factor"] < 1.0
        assert metrics["decay_fdm_deviation"] < 1e-8
        assert metrics["decay_residual_deviation"] < 1e-8


class TestMetricExpectation:
    """Test cases for preset expectations."""

    def test_holds(self):
        """Test that a satisfied expectation gives no diff."""
        assert MetricExpectation("error", Comparison.AT_MOST, 0.1).check({"error": 0.1}) is None
        assert MetricExpectation("ratio", Comparison.ABOVE, 0.1).check({"ratio": 0.2}) is None

    def test_miss_is_described(self):
        """Test the one-line diff of a miss."""
        diff = MetricExpectation("error", Comparison.BELOW, 0.1, reported_value=0.05).check({"error": 0.5})
        assert diff == "error = 5.000000e-01, expected < 0.1 (reported 0.05)"

    def test_missing_and_nan(self):
        """Test that absent and NaN metrics never pass."""
        expectation = MetricExpectation("error", Comparison.AT_LEAST, 0.0)
        assert "missing" in expectation.check({})
        assert expectation.check({"error": math.nan}) is not None


class TestPresets:
    """Test cases for the preset registry and runner."""

    def test_registry(self):
        """Test lookup and the scale split."""
        assert get_preset("entanglement_ci").scale == PresetScale.CI
        assert "entanglement_ci" in preset_names(PresetScale.CI)
        assert "ns_periodic_n64_full" in preset_names(PresetScale.EXTENDED)
        assert len(preset_names()) == len(PRESETS)
        with pytest.raises(ConfigError, match="unknown preset"):
            get_preset("nope")

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_configs_parse(self, name):
        """Test that every preset carries a valid run configuration."""
        config = PRESETS[name].run_config(seed=3, output_dir="/tmp/presets")
        assert config.seeds.base == 3
        assert config.output_dir == "/tmp/presets"

    def test_entanglement_preset(self, tmp_path):
        """Test the inverse-operator study end to end."""
        result = run_preset("entanglement_ci", str(tmp_path))
        assert result.passed
        assert result.metrics["periodic_shift_deviation"] < 1e-10
        assert result.metrics["dirichlet_shift_mismatch"] > 0.1
        rows = sorted(p.name for p in (tmp_path / "presets" / "entanglement_ci" / "rows").glob("*.pgm"))
        assert len(rows) == 8
        metrics = json.loads((tmp_path / "presets" / "entanglement_ci" / "metrics.json").read_text())
        assert all(entry["passed"] for entry in metrics["expectations"])

    @patch("src.lordnet.experiments.PresetRunner.run")
    def test_ci_miss_raises(self, mock_run, tmp_path):
        """Test that a ci preset that misses its gate raises with the diffs."""
        mock_run.return_value = ({"mean_relative_error": 1.0}, None)
        with pytest.raises(AcceptanceError) as excinfo:
            run_preset("poisson_periodic_n32_ci", str(tmp_path))
        assert len(excinfo.value.failures) == 1
        assert (tmp_path / "presets" / "poisson_periodic_n32_ci" / "metrics.json").exists()

    @patch("src.lordnet.experiments.PresetRunner.run")
    def test_extended_miss_only_logs(self, mock_run, tmp_path):
        """Test that extended presets report misses without raising."""
        mock_run.return_value = ({"mean_relative_error": 1.0}, None)
        result = run_preset("poisson_periodic_n32_full", str(tmp_path))
        assert not result.passed
        assert result.failures[0].startswith("mean_relative_error = 1.000000e+00")

    @pytest.mark.slow
    @pytest.mark.parametrize("name", [name for name in preset_names(PresetScale.CI) if name != "entanglement_ci"])
    def test_ci_presets(self, name, tmp_path):
        """Test that the desk-scale presets meet their gates."""
        assert run_preset(name, str(tmp_path)).passed
