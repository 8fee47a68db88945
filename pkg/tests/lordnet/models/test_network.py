"""
Tests for network assembly, parameter counts and the model interface.
"""

import numpy as np
import pytest

from src.lordnet.dataclasses import (
    ConvBoundary,
    DilatedCnnConfig,
    ModuleOrdering,
    NetworkConfig,
    NetworkVariant,
)
from src.lordnet.errors import ConfigError, ShapeError
from src.lordnet.models import build_model, build_network
from src.lordnet.tensor_core.tape import Tape


class TestParameterCounts:
    """Test cases for the assembled parameter budgets."""

    def test_ns_lord_64(self):
        """Test the Navier-Stokes network at 64×64 against its expected budget."""
        model = build_network(NetworkConfig(NetworkVariant.NS_LORD, (64, 64), channels=64, hidden=(256, 128)))
        assert model.parameter_count == 1_172_801
        assert abs(model.parameter_count - 1.15e6) / 1.15e6 < 0.1

    def test_ns_lord_64_factored_layer_on_embedding(self):
        """Test that factoring the 128-wide embedding instead of the 64-channel stream doubles the budget."""
        model = build_network(NetworkConfig(NetworkVariant.NS_LORD, (64, 64), channels=64, hidden=(256, 128),
                                            ordering=ModuleOrdering.EMBED_LORD_MIX))
        assert model.parameter_count == 2_221_505
        assert model.parameter_count > 1.1 * 1.15e6

    def test_ns_lord_lid_driven_interior(self):
        """Test the lid-driven 62×62 interior budget."""
        model = build_network(NetworkConfig(NetworkVariant.NS_LORD, (62, 62), channels=64, hidden=(256, 128)))
        assert model.parameter_count == 1_108_289
        assert abs(model.parameter_count - 1.15e6) / 1.15e6 < 0.1

    def test_poisson_linear(self):
        """Test the linear network budget: lift, factored layers and head."""
        model = build_network(NetworkConfig(NetworkVariant.POISSON_LINEAR, (32, 32), channels=16, layers=2))
        per_layer = 16 + 2 * 16 * 32 * 32
        assert model.parameter_count == 16 + 2 * per_layer + 16

    def test_interleaved_mixers(self):
        """Test that mixers sit between factored layers only."""
        plain = build_network(NetworkConfig(NetworkVariant.POISSON_LINEAR, (8, 8), channels=4, layers=3))
        mixed = build_network(NetworkConfig(NetworkVariant.POISSON_LINEAR, (8, 8), channels=4, layers=3,
                                            interleave_mixers=True))
        assert mixed.parameter_count - plain.parameter_count == 2 * 4 * 4
        assert "mix2.w" not in mixed.params


class TestBuildNetwork:
    """Test cases for initialization and the model interface."""

    def setup_method(self):
        """Set up common test data."""
        self.cfg = NetworkConfig(NetworkVariant.NS_LORD, (6, 6), channels=3, hidden=(5, 4), seed=7)
        self.rng = np.random.default_rng(0)

    def test_seeded(self):
        """Test that the seed fixes every parameter."""
        first, second = build_network(self.cfg), build_network(self.cfg)
        other = build_network(NetworkConfig(NetworkVariant.NS_LORD, (6, 6), channels=3, hidden=(5, 4), seed=8))
        for name in first.params:
            np.testing.assert_array_equal(first.params[name], second.params[name])
        assert any(np.any(first.params[name] != other.params[name]) for name in first.params)

    def test_shortcut_starts_at_identity(self):
        """Test the learned shortcut initialization."""
        model = build_network(self.cfg)
        np.testing.assert_array_equal(model.params["module0.shortcut.w"], np.eye(3))
        np.testing.assert_array_equal(model.params["module0.shortcut.b"], np.zeros(3))
        np.testing.assert_array_equal(model.params["module0.lord.eta"], np.ones((3, 1)))

    @pytest.mark.parametrize("ordering,lord_channels", [
        (ModuleOrdering.EMBED_MIX_LORD, 3),
        (ModuleOrdering.EMBED_LORD_MIX, 4),
    ])
    def test_module_orderings(self, ordering, lord_channels):
        """Test that the factored layer width follows the module ordering."""
        cfg = NetworkConfig(NetworkVariant.NS_LORD, (6, 6), channels=3, hidden=(5, 4), ordering=ordering)
        model = build_network(cfg)
        assert model.params["module0.lord.a0"].shape == (lord_channels, 1, 6, 6)
        out = model.predict(self.rng.standard_normal((2, 1, 6, 6)))
        assert out.shape == (2, 1, 6, 6)
        assert np.all(np.isfinite(out))

    def test_predict_single_field(self):
        """Test that a 2D input is treated as one single-channel sample."""
        model = build_network(self.cfg)
        field = self.rng.standard_normal((6, 6))
        np.testing.assert_array_equal(model.predict(field), model.predict(field[None, None])[0, 0])

    def test_forward_shape_check(self):
        """Test that the model refuses inputs of the wrong spatial shape."""
        model = build_network(self.cfg)
        with pytest.raises(ShapeError):
            model.predict(np.zeros((1, 1, 5, 5)))

    def test_register_creates_variables(self):
        """Test that registering puts every parameter on the tape as a variable."""
        model = build_network(self.cfg)
        tape = Tape()
        handles = model.register(tape)
        assert set(handles) == set(model.params)
        assert set(tape.variables) == set(model.params)

    def test_with_params(self):
        """Test parameter replacement and its validation."""
        model = build_network(self.cfg)
        zeros = {name: np.zeros_like(value) for name, value in model.params.items()}
        replaced = model.with_params(zeros)
        np.testing.assert_array_equal(replaced.predict(np.ones((6, 6))), np.zeros((6, 6)))
        with pytest.raises(ConfigError):
            model.with_params({"lift.w": zeros["lift.w"]})
        wrong = dict(zeros, **{"lift.w": np.zeros((2, 2))})
        with pytest.raises(ShapeError):
            model.with_params(wrong)

    def test_poisson_linear_is_linear(self):
        """Test that the Poisson network is a linear map of its input."""
        model = build_network(NetworkConfig(NetworkVariant.POISSON_LINEAR, (6, 6), channels=3, layers=2, rank=2))
        x, y = self.rng.standard_normal((2, 6, 6))
        combined = model.predict(2.0 * x - 3.0 * y)
        np.testing.assert_allclose(combined, 2.0 * model.predict(x) - 3.0 * model.predict(y), atol=1e-10)

    def test_rejects_cnn_config(self):
        """Test that build_network only takes network configs."""
        with pytest.raises(ConfigError):
            build_network(DilatedCnnConfig((5, 5), dilations=(1, 2, 1)))

    def test_build_model_dispatch(self):
        """Test that build_model picks the builder from the config type."""
        assert build_model(self.cfg).kind == "ns_lord"
        cnn = build_model(DilatedCnnConfig((5, 5), dilations=(1, 2, 1), boundary_mode=ConvBoundary.ZERO_PAD))
        assert cnn.kind == "dilated_cnn"

    @pytest.mark.parametrize("kwargs", [
        {"channels": 0},
        {"spatial_shape": (4,)},
        {"hidden": (4,)},
    ])
    def test_invalid_config(self, kwargs):
        """Test configuration validation."""
        base = {"variant": NetworkVariant.NS_LORD, "spatial_shape": (4, 4)}
        base.update(kwargs)
        with pytest.raises(ConfigError):
            NetworkConfig(**base)
