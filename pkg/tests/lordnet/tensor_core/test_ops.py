"""
Tests for the differentiable operators against naive loop evaluations.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.lordnet.dataclasses import ConvBoundary
from src.lordnet.errors import ContractError, ShapeError, SizeError
from src.lordnet.tensor_core import ops
from src.lordnet.tensor_core.field import StencilBoundary, StencilKernel, laplacian_5pt
from src.lordnet.tensor_core.ops import ElementwiseKind
from src.lordnet.tensor_core.tape import Tape


class TestPointwiseOps:
    """Test cases for conv1x1, GELU and the elementwise family."""

    def setup_method(self):
        """Set up common test data."""
        self.rng = np.random.default_rng(1)
        self.tape = Tape()

    def test_conv1x1_matches_loop(self):
        """Test conv1x1 against a per-point loop."""
        x = self.rng.standard_normal((4, 3, 8, 8))
        w = self.rng.standard_normal((5, 3))
        bias = self.rng.standard_normal(5)
        y = ops.conv1x1(self.tape.constant(x), self.tape.constant(w), self.tape.constant(bias)).value

        expected = np.zeros((4, 5, 8, 8))
        for b in range(4):
            for o in range(5):
                for i in range(8):
                    for j in range(8):
                        expected[b, o, i, j] = sum(w[o, c] * x[b, c, i, j] for c in range(3)) + bias[o]
        assert np.max(np.abs(y - expected)) < 1e-12

    def test_conv1x1_channel_mismatch(self):
        """Test that a weight with the wrong input width is rejected."""
        x = self.tape.constant(np.zeros((1, 3, 2, 2)))
        with pytest.raises(ShapeError):
            ops.conv1x1(x, self.tape.constant(np.zeros((2, 4))))

    def test_gelu_exact_form(self):
        """Test that GELU uses the error-function CDF."""
        x = np.linspace(-4.0, 4.0, 17)
        y = ops.gelu(self.tape.constant(x)).value
        expected = [v * 0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in x]
        np.testing.assert_allclose(y, expected, rtol=0, atol=1e-13)
        assert y[8] == 0.0

    def test_elementwise_dispatch(self):
        """Test that elementwise routes to the named operator."""
        a = self.tape.constant(np.array([1.0, -2.0]))
        b = self.tape.constant(np.array([3.0, 4.0]))
        np.testing.assert_array_equal(ops.elementwise(ElementwiseKind.ADD, a, b).value, [4.0, 2.0])
        np.testing.assert_array_equal(ops.elementwise(ElementwiseKind.SUB, a, b).value, [-2.0, -6.0])
        np.testing.assert_array_equal(ops.elementwise(ElementwiseKind.HADAMARD, a, b).value, [3.0, -8.0])
        np.testing.assert_array_equal(ops.elementwise(ElementwiseKind.SCALE, a, 2.0).value, [2.0, -4.0])

    def test_elementwise_arity(self):
        """Test operand-count errors of the elementwise dispatcher."""
        a = self.tape.constant(np.ones(2))
        with pytest.raises(ContractError):
            ops.elementwise(ElementwiseKind.GELU, a, a)
        with pytest.raises(ContractError):
            ops.elementwise(ElementwiseKind.ADD, a)

    def test_elementwise_shape_mismatch(self):
        """Test that unequal non-scalar shapes are refused."""
        with pytest.raises(ShapeError):
            ops.add(self.tape.constant(np.ones(2)), self.tape.constant(np.ones(3)))

    def test_scale_rejects_non_real(self):
        """Test that scale needs a real factor."""
        with pytest.raises(ContractError):
            ops.scale(self.tape.constant(np.ones(2)), "2")

    def test_mean_square_empty(self):
        """Test that the mean square of an empty tensor is a size error."""
        with pytest.raises(SizeError):
            ops.mean_square(self.tape.constant(np.zeros((0, 3))))


class TestAxisMatmul:
    """Test cases for the per-channel spatial-axis contraction."""

    def setup_method(self):
        """Set up common test data."""
        self.rng = np.random.default_rng(2)
        self.tape = Tape()
        self.x = self.rng.standard_normal((2, 3, 4, 5))

    def test_axis_zero_matches_loop(self):
        """Test contraction along the first spatial axis."""
        w = self.rng.standard_normal((3, 4, 6))
        y = ops.axis_matmul(self.tape.constant(self.x), self.tape.constant(w), 0).value
        assert y.shape == (2, 3, 6, 5)
        expected = np.zeros_like(y)
        for b in range(2):
            for c in range(3):
                for o in range(6):
                    for j in range(5):
                        expected[b, c, o, j] = sum(self.x[b, c, i, j] * w[c, i, o] for i in range(4))
        assert np.max(np.abs(y - expected)) < 1e-12

    def test_axis_one_matches_loop(self):
        """Test contraction along the second spatial axis."""
        w = self.rng.standard_normal((3, 5, 2))
        y = ops.axis_matmul(self.tape.constant(self.x), self.tape.constant(w), 1).value
        assert y.shape == (2, 3, 4, 2)
        expected = np.zeros_like(y)
        for b in range(2):
            for c in range(3):
                for i in range(4):
                    for o in range(2):
                        expected[b, c, i, o] = sum(self.x[b, c, i, j] * w[c, j, o] for j in range(5))
        assert np.max(np.abs(y - expected)) < 1e-12

    def test_axis_out_of_range(self):
        """Test that a missing spatial axis is a shape error."""
        w = self.tape.constant(np.zeros((3, 4, 4)))
        with pytest.raises(ShapeError):
            ops.axis_matmul(self.tape.constant(self.x), w, 2)

    def test_weight_mismatch(self):
        """Test that a weight with the wrong input size is refused."""
        w = self.tape.constant(np.zeros((3, 5, 5)))
        with pytest.raises(ShapeError):
            ops.axis_matmul(self.tape.constant(self.x), w, 0)


class TestStencilApply:
    """Test cases for fixed-coefficient stencils."""

    def setup_method(self):
        """Set up common test data."""
        self.rng = np.random.default_rng(3)
        self.tape = Tape()
        self.x = self.rng.standard_normal((2, 1, 6, 5))
        self.delta = 0.25

    def test_periodic_laplacian(self):
        """Test the wrapped 5-point Laplacian against np.roll."""
        y = ops.stencil_apply(self.tape.constant(self.x), laplacian_5pt(StencilBoundary.PERIODIC_WRAP),
                              self.delta).value
        expected = (np.roll(self.x, 1, axis=2) + np.roll(self.x, -1, axis=2) + np.roll(self.x, 1, axis=3)
                    + np.roll(self.x, -1, axis=3) - 4.0 * self.x) / self.delta ** 2
        assert np.max(np.abs(y - expected)) < 1e-12

    @pytest.mark.parametrize("k,l", [(1, 0), (1, 2), (3, 3)])
    def test_periodic_laplacian_eigenfield(self, k, l):
        """Test that a wrapped Fourier mode is scaled by the discrete Laplacian eigenvalue."""
        n = 8
        delta = 1.0 / n
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        mode = np.sin(2.0 * np.pi * k * i / n + 0.3) * np.cos(2.0 * np.pi * l * j / n)
        y = ops.stencil_apply(self.tape.constant(mode[None, None]), laplacian_5pt(StencilBoundary.PERIODIC_WRAP),
                              delta).value
        eigenvalue = 4.0 / delta ** 2 * (math.sin(math.pi * k / n) ** 2 + math.sin(math.pi * l / n) ** 2)
        assert np.max(np.abs(y[0, 0] + eigenvalue * mode)) < 1e-10

    def test_interior_laplacian(self):
        """Test that the interior-only stencil covers interior points only."""
        y = ops.stencil_apply(self.tape.constant(self.x), laplacian_5pt(StencilBoundary.DIRICHLET_INTERIOR_ONLY),
                              self.delta).value
        assert y.shape == (2, 1, 4, 3)
        x = self.x
        for i in range(1, 5):
            for j in range(1, 4):
                expected = (x[:, :, i + 1, j] + x[:, :, i - 1, j] + x[:, :, i, j + 1] + x[:, :, i, j - 1]
                            - 4.0 * x[:, :, i, j]) / self.delta ** 2
                assert np.max(np.abs(y[:, :, i - 1, j - 1] - expected)) < 1e-12

    def test_unscaled_kernel(self):
        """Test a kernel that skips the 1/Δ² factor."""
        kernel = StencilKernel(((0, 1),), (2.0,), StencilBoundary.PERIODIC_WRAP, scale_by_delta_sq=False)
        y = ops.stencil_apply(self.tape.constant(self.x), kernel, self.delta).value
        np.testing.assert_array_equal(y, 2.0 * np.roll(self.x, -1, axis=3))

    def test_grid_smaller_than_reach(self):
        """Test that an interior stencil needs at least one interior point."""
        x = self.tape.constant(np.zeros((1, 1, 2, 5)))
        with pytest.raises(SizeError):
            ops.stencil_apply(x, laplacian_5pt(StencilBoundary.DIRICHLET_INTERIOR_ONLY), 1.0)

    def test_kernel_length_mismatch(self):
        """Test that offsets and coefficients must pair up."""
        with pytest.raises(ContractError):
            StencilKernel(((0, 0), (1, 0)), (1.0,), StencilBoundary.PERIODIC_WRAP)


class TestConv2dDilated:
    """Test cases for the 3×3 dilated convolution."""

    def setup_method(self):
        """Set up common test data."""
        self.rng = np.random.default_rng(4)
        self.tape = Tape()
        self.x = self.rng.standard_normal((2, 2, 6, 5))
        self.w = self.rng.standard_normal((3, 2, 3, 3))

    def _direct(self, dilation, wrap):
        batch, c_in, height, width = self.x.shape
        out = np.zeros((batch, self.w.shape[0], height, width))
        for b in range(batch):
            for o in range(self.w.shape[0]):
                for i in range(height):
                    for j in range(width):
                        total = 0.0
                        for c in range(c_in):
                            for a in range(3):
                                for e in range(3):
                                    si, sj = i + (a - 1) * dilation, j + (e - 1) * dilation
                                    if wrap:
                                        si, sj = si % height, sj % width
                                    elif not (0 <= si < height and 0 <= sj < width):
                                        continue
                                    total += self.w[o, c, a, e] * self.x[b, c, si, sj]
                        out[b, o, i, j] = total
        return out

    @pytest.mark.parametrize("dilation", [1, 2, 3])
    def test_zero_pad_matches_loop(self, dilation):
        """Test the zero-padded convolution against a direct loop."""
        y = ops.conv2d_dilated(self.tape.constant(self.x), self.tape.constant(self.w), dilation,
                               ConvBoundary.ZERO_PAD).value
        assert np.max(np.abs(y - self._direct(dilation, wrap=False))) < 1e-12

    @pytest.mark.parametrize("dilation", [1, 2])
    def test_wrap_matches_loop(self, dilation):
        """Test the circular convolution against a direct loop."""
        y = ops.conv2d_dilated(self.tape.constant(self.x), self.tape.constant(self.w), dilation,
                               ConvBoundary.PERIODIC_WRAP).value
        assert np.max(np.abs(y - self._direct(dilation, wrap=True))) < 1e-12

    def test_invalid_dilation(self):
        """Test that a dilation below one is refused."""
        with pytest.raises(ContractError):
            ops.conv2d_dilated(self.tape.constant(self.x), self.tape.constant(self.w), 0, ConvBoundary.ZERO_PAD)


class TestPlumbing:
    """Test cases for reshape, transpose, select and padding."""

    def setup_method(self):
        """Set up common test data."""
        self.tape = Tape()
        self.x = np.arange(24.0).reshape(2, 3, 4)

    def test_reshape_invalid(self):
        """Test that an impossible reshape is a shape error."""
        with pytest.raises(ShapeError):
            ops.reshape(self.tape.constant(self.x), (5, 5))

    def test_transpose_invalid(self):
        """Test that a non-permutation is refused."""
        with pytest.raises(ShapeError):
            ops.transpose(self.tape.constant(self.x), (0, 0, 1))

    def test_select(self):
        """Test selecting one slice along an axis."""
        y = ops.select(self.tape.constant(self.x), 2, 2).value
        np.testing.assert_array_equal(y, self.x[:, :, 2])

    def test_pad_zero(self):
        """Test that padding surrounds the spatial axes only."""
        y = ops.pad_zero(self.tape.constant(np.ones((1, 1, 2, 2))), 1).value
        assert y.shape == (1, 1, 4, 4)
        assert y.sum() == 4.0
        assert y[0, 0, 0].sum() == 0.0

    @settings(max_examples=40, deadline=None)
    @given(di=st.integers(-6, 6), dj=st.integers(-6, 6))
    def test_wrapped_shift_inverts(self, di, dj):
        """Test that a wrapped shift is undone by the opposite shift."""
        values = np.arange(20.0).reshape(4, 5)
        back = ops.shift(ops.shift(values, (di, dj), wrap=True), (-di, -dj), wrap=True)
        np.testing.assert_array_equal(back, values)

    @settings(max_examples=40, deadline=None)
    @given(di=st.integers(-6, 6), dj=st.integers(-6, 6))
    def test_zero_shift_reads_in_range(self, di, dj):
        """Test that a non-wrapped shift reads values[i+di, j+dj] or zero."""
        values = np.arange(1.0, 21.0).reshape(4, 5)
        out = ops.shift(values, (di, dj), wrap=False)
        for i in range(4):
            for j in range(5):
                inside = 0 <= i + di < 4 and 0 <= j + dj < 5
                assert out[i, j] == (values[i + di, j + dj] if inside else 0.0)
