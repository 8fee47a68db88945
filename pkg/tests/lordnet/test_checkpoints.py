"""
Tests for saving and restoring model checkpoints.
"""

import json

import numpy as np
import pytest

from src.lordnet.checkpoints import load_checkpoint, save_checkpoint
from src.lordnet.dataclasses import ConvBoundary, DilatedCnnConfig, NetworkConfig, NetworkVariant
from src.lordnet.errors import ConfigError
from src.lordnet.models import build_model


class TestCheckpoints:
    """Test cases for the manifest plus per-parameter files."""

    def setup_method(self):
        """Set up common test data."""
        self.field = np.random.default_rng(0).standard_normal((6, 6))

    @pytest.mark.parametrize("config", [
        NetworkConfig(NetworkVariant.NS_LORD, (6, 6), channels=3, hidden=(5, 4), seed=2),
        NetworkConfig(NetworkVariant.POISSON_LINEAR, (6, 6), channels=2, rank=2),
        DilatedCnnConfig((6, 6), channels=2, dilations=(1, 2, 2), boundary_mode=ConvBoundary.PERIODIC_WRAP),
    ])
    def test_round_trip(self, config, tmp_path):
        """Test that a restored model predicts exactly like the saved one."""
        model = build_model(config)
        save_checkpoint(model, str(tmp_path), 17)
        loaded, iteration = load_checkpoint(str(tmp_path))
        assert iteration == 17
        assert loaded.config == config
        for name, value in model.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)
        np.testing.assert_array_equal(loaded.predict(self.field), model.predict(self.field))

    def test_manifest_contents(self, tmp_path):
        """Test the manifest fields and extra entries."""
        model = build_model(NetworkConfig(NetworkVariant.POISSON_LINEAR, (6, 6), channels=2))
        path = save_checkpoint(model, str(tmp_path), 0, extra={"loss": 0.5})
        with open(path) as f:
            manifest = json.load(f)
        assert manifest["model"] == "poisson_linear"
        assert manifest["parameter_count"] == model.parameter_count
        assert manifest["loss"] == 0.5
        assert {entry["name"] for entry in manifest["parameters"]} == set(model.params)
        assert all(entry["file"].startswith("params/") for entry in manifest["parameters"])

    def test_explicit_params(self, tmp_path):
        """Test saving a parameter set other than the model's own."""
        model = build_model(NetworkConfig(NetworkVariant.POISSON_LINEAR, (6, 6), channels=2))
        zeros = {name: np.zeros_like(value) for name, value in model.params.items()}
        save_checkpoint(model, str(tmp_path), 3, params=zeros)
        loaded, _ = load_checkpoint(str(tmp_path))
        np.testing.assert_array_equal(loaded.predict(self.field), np.zeros((6, 6)))

    def test_missing_manifest(self, tmp_path):
        """Test that an empty directory is not a checkpoint."""
        with pytest.raises(ConfigError, match="not found"):
            load_checkpoint(str(tmp_path))

    def test_foreign_manifest(self, tmp_path):
        """Test that other JSON files are refused."""
        (tmp_path / "manifest.json").write_text(json.dumps({"format": "other"}))
        with pytest.raises(ConfigError, match="not a lordnet checkpoint"):
            load_checkpoint(str(tmp_path))

    def test_unknown_model_kind(self, tmp_path):
        """Test that unknown model kinds are refused."""
        (tmp_path / "manifest.json").write_text(json.dumps({"format": "lordnet-checkpoint", "model": "mlp"}))
        with pytest.raises(ConfigError, match="unknown model kind"):
            load_checkpoint(str(tmp_path))
