"""
Tests for the reverse-mode tape.
"""

import numpy as np
import pytest

from src.lordnet.errors import ContractError
from src.lordnet.tensor_core import ops
from src.lordnet.tensor_core.tape import Tape, backward


class TestTape:
    """Test cases for variable registration and gradient accumulation."""

    def setup_method(self):
        """Set up common test data."""
        self.rng = np.random.default_rng(0)
        self.x = self.rng.standard_normal((2, 3))

    def test_duplicate_variable_name(self):
        """Test that a variable name can only be registered once per tape."""
        tape = Tape()
        tape.variable(self.x, "x")
        with pytest.raises(ContractError, match="already"):
            tape.variable(self.x, "x")

    def test_values_are_read_only(self):
        """Test that recorded values cannot be mutated in place."""
        tape = Tape()
        x = tape.variable(self.x, "x")
        y = ops.scale(x, 2.0)
        assert not x.value.flags.writeable
        assert not y.value.flags.writeable

    def test_variable_copies_its_input(self):
        """Test that later changes to the source array do not reach the tape."""
        source = np.array(self.x)
        tape = Tape()
        x = tape.variable(source, "x")
        source[0, 0] = 100.0
        assert x.value[0, 0] == self.x[0, 0]

    def test_non_scalar_loss(self):
        """Test that backward refuses a non-scalar loss."""
        tape = Tape()
        x = tape.variable(self.x, "x")
        with pytest.raises(ContractError, match="scalar"):
            tape.backward(ops.scale(x, 1.0))

    def test_empty_tape(self):
        """Test that backward on an empty tape is a contract violation."""
        other = Tape()
        loss = ops.mean_square(other.variable(self.x, "x"))
        with pytest.raises(ContractError, match="empty"):
            Tape().backward(loss)

    def test_loss_from_another_tape(self):
        """Test that a loss recorded elsewhere is refused."""
        first, second = Tape(), Tape()
        first.variable(self.x, "x")
        loss = ops.mean_square(second.variable(self.x, "x"))
        with pytest.raises(ContractError, match="another|belong"):
            first.backward(loss)

    def test_mixing_tapes(self):
        """Test that operands from different tapes cannot be combined."""
        a = Tape().variable(self.x, "a")
        b = Tape().variable(self.x, "b")
        with pytest.raises(ContractError):
            ops.add(a, b)

    def test_fan_out_accumulates(self):
        """Test that a variable used twice receives both contributions."""
        tape = Tape()
        x = tape.variable(self.x, "x")
        loss = ops.mean_square(ops.add(x, x))
        grads = backward(loss)
        np.testing.assert_allclose(grads["x"], 8.0 * self.x / self.x.size, rtol=1e-14)

    def test_repeated_backward_is_idempotent(self):
        """Test that gradients are reset between backward calls."""
        tape = Tape()
        x = tape.variable(self.x, "x")
        loss = ops.mean_square(x)
        first = tape.backward(loss)
        second = tape.backward(loss)
        np.testing.assert_array_equal(first["x"], second["x"])

    def test_constant_only_loss(self):
        """Test that a loss without variables leaves every gradient at zero."""
        tape = Tape()
        tape.variable(self.x, "x")
        loss = ops.mean_square(tape.constant(self.x))
        grads = tape.backward(loss)
        np.testing.assert_array_equal(grads["x"], np.zeros_like(self.x))

    def test_loss_gradient_is_seeded(self):
        """Test that the loss carries d(loss)/d(loss) = 1 whether or not it tracks gradients."""
        tape = Tape()
        x = tape.variable(self.x, "x")
        tracked = ops.mean_square(x)
        tape.backward(tracked)
        assert tracked.grad == 1.0

        untracked = ops.mean_square(tape.constant(self.x))
        assert untracked.grad is None
        tape.backward(untracked)
        assert untracked.grad.shape == ()
        assert untracked.grad == 1.0

    def test_constants_get_no_gradient(self):
        """Test that constants do not track gradients."""
        tape = Tape()
        c = tape.constant(self.x)
        assert c.grad is None
        assert not c.requires_grad

    def test_variables_listing(self):
        """Test that registered variables are listed by name."""
        tape = Tape()
        tape.variable(self.x, "x")
        tape.variable(self.x, "y")
        assert sorted(tape.variables) == ["x", "y"]
        assert len(tape) == 2
