"""
Tests for relative errors, rollouts and evaluation reports.
"""

import json
from unittest.mock import Mock

import numpy as np
import pytest

from src.lordnet.dataclasses import (
    NS_INITIAL_VORTICITY,
    POISSON_FORCING,
    Boundary,
    EvalProtocol,
    EvalProtocolKind,
    GridSpec,
    NsParams,
    ResidualKind,
    ResidualSpec,
)
from src.lordnet.datasets import build_test_set
from src.lordnet.errors import ContractError, DegenerateTruthError, NonFiniteStateError, ShapeError
from src.lordnet.evaluate import FdmReference, evaluate, relative_error, rollout, write_report

ONE_STEP = EvalProtocol(EvalProtocolKind.ONE_STEP, 1)


class _Scale:
    """Linear stand-in model: multiplies its input."""

    def __init__(self, factor):
        self.factor = factor

    def predict(self, inputs):
        return self.factor * np.asarray(inputs)


class TestRelativeError:
    """Test cases for the relative L2 error."""

    def setup_method(self):
        """Set up common test data."""
        self.truth = np.random.default_rng(0).standard_normal((5, 5))

    def test_exact_and_zero_predictions(self):
        """Test the two reference values 0 and 1."""
        assert relative_error(self.truth, self.truth) == 0.0
        assert relative_error(np.zeros_like(self.truth), self.truth) == pytest.approx(1.0)

    def test_gauge_free_ignores_constants(self):
        """Test that a constant offset does not count on gauge-free problems."""
        shifted = self.truth + 3.0
        assert relative_error(shifted, self.truth, gauge_free=True) < 1e-14
        assert relative_error(shifted, self.truth) > 0.1

    def test_degenerate_truth(self):
        """Test that a zero truth has no relative error."""
        with pytest.raises(DegenerateTruthError):
            relative_error(np.ones((3, 3)), np.zeros((3, 3)))
        with pytest.raises(DegenerateTruthError):
            relative_error(np.ones((3, 3)), np.full((3, 3), 2.0), gauge_free=True)

    def test_shape_mismatch(self):
        """Test that shapes must agree."""
        with pytest.raises(ShapeError):
            relative_error(np.zeros((3, 3)), np.ones((4, 4)))


class TestRollout:
    """Test cases for autoregressive rollouts."""

    def test_zero_steps(self):
        """Test that no steps gives just the initial state."""
        states = rollout(_Scale(2.0), np.ones((2, 2)), 0)
        assert len(states) == 1
        np.testing.assert_array_equal(states[0], np.ones((2, 2)))

    def test_composition(self):
        """Test that each state is the model applied to the previous one."""
        model = _Scale(0.5)
        x = np.random.default_rng(1).standard_normal((3, 3))
        states = rollout(model, x, 3)
        assert len(states) == 4
        np.testing.assert_array_equal(states[3], model.predict(model.predict(model.predict(x))))

    def test_negative_steps(self):
        """Test that a negative horizon is refused."""
        with pytest.raises(ContractError):
            rollout(_Scale(1.0), np.ones((2, 2)), -1)

    def test_non_finite_state(self):
        """Test that an overflowing rollout reports the failing step."""
        with pytest.raises(NonFiniteStateError) as excinfo:
            rollout(_Scale(1e200), np.ones((2, 2)), 5)
        assert excinfo.value.step == 2


class TestEvaluate:
    """Test cases for evaluation against held-out references."""

    def setup_method(self):
        """Set up common test data."""
        self.spec = ResidualSpec(ResidualKind.POISSON_DIRICHLET, GridSpec(n=9, boundary=Boundary.DIRICHLET_ZERO))
        self.test_set = build_test_set(self.spec, POISSON_FORCING, 0, 4, ONE_STEP)

    def test_fdm_reference_reproduces_truth(self):
        """Test that the solver wrapper scores at round-off level."""
        report = evaluate(FdmReference(self.spec), self.test_set, ONE_STEP)
        assert len(report.errors) == 4
        assert max(report.errors) <= 10 * 1e-10

    def test_zero_model(self):
        """Test that an all-zero prediction scores exactly one."""
        model = Mock()
        model.predict.side_effect = np.zeros_like
        report = evaluate(model, self.test_set, ONE_STEP)
        assert report.errors == pytest.approx([1.0] * 4)
        assert report.mean == pytest.approx(1.0)
        assert report.std == pytest.approx(0.0, abs=1e-15)

    def test_rollout_protocol(self):
        """Test the rollout error curve with the solver as model."""
        grid = GridSpec(n=8, boundary=Boundary.LID_DRIVEN, lid_speed=1.0)
        spec = ResidualSpec(ResidualKind.NS_LIDDRIVEN, grid, NsParams(reynolds=1000.0, dt=0.01))
        protocol = EvalProtocol(EvalProtocolKind.ROLLOUT, 2)
        test_set = build_test_set(spec, NS_INITIAL_VORTICITY, 0, 2, protocol, t0=0.02)
        report = evaluate(FdmReference(spec), test_set, protocol)
        assert len(report.error_curve) == 2
        assert max(report.errors) < 1e-9
        assert report.horizon == 2

    def test_write_report(self, tmp_path):
        """Test the report files, with timing kept out of the reproducible outputs."""
        report = evaluate(FdmReference(self.spec), self.test_set, ONE_STEP, timing_repetitions=2)
        write_report(report, str(tmp_path), self.test_set.sample_ids)

        lines = (tmp_path / "eval.csv").read_text().splitlines()
        assert lines[0] == "sample_id,error"
        assert len(lines) == 5
        summary = json.loads((tmp_path / "eval.json").read_text())
        assert summary["count"] == 4
        assert summary["protocol"] == "one_step"
        assert "median_inference_ms" not in summary
        timing = json.loads((tmp_path / "timing.json").read_text())
        assert timing["median_inference_ms"] >= 0.0

    def test_no_timing_file_without_timing(self, tmp_path):
        """Test that timing.json is only written when timing ran."""
        report = evaluate(FdmReference(self.spec), self.test_set, ONE_STEP)
        write_report(report, str(tmp_path))
        assert not (tmp_path / "timing.json").exists()
