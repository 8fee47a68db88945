"""
Differentiable operators over batch-first tensors (B×C×S...).

Every operator computes its forward value with numpy and records on the tape of its
operands a closure that pushes the output gradient back to them.
"""

import math
from enum import Enum
from numbers import Real
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from ..dataclasses import ConvBoundary
from ..errors import ContractError, ShapeError, SizeError
from .field import StencilBoundary, StencilKernel
from .tape import DiffValue, Tape

Operand = Union[DiffValue, float]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ElementwiseKind(Enum):
    ADD = "add"
    SUB = "sub"
    HADAMARD = "hadamard"
    SCALE = "scale"
    GELU = "gelu"


def _tape_of(*values: DiffValue) -> Tape:
    tape = values[0].tape
    for value in values[1:]:
        if value.tape is not tape:
            raise ContractError("operands live on different tapes")
    return tape


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def _check_broadcast(a: DiffValue, b: DiffValue, kind: ElementwiseKind) -> None:
    if a.shape != b.shape and b.shape != () and a.shape != ():
        raise ShapeError(f"{kind.value} needs equal shapes or a scalar operand", a.shape, b.shape)


def elementwise(kind: ElementwiseKind, a: DiffValue, b: Optional[Operand] = None) -> DiffValue:
    if kind == ElementwiseKind.GELU:
        if b is not None:
            raise ContractError("gelu takes a single operand")
        return gelu(a)
    if b is None:
        raise ContractError(f"{kind.value} needs a second operand")
    if kind == ElementwiseKind.ADD:
        return add(a, b)
    if kind == ElementwiseKind.SUB:
        return sub(a, b)
    if kind == ElementwiseKind.HADAMARD:
        return hadamard(a, b)
    return scale(a, b)


def add(a: DiffValue, b: Operand) -> DiffValue:
    if isinstance(b, Real):
        offset = float(b)
        return a.tape.record(a.value + offset, (a,), lambda g: a.accumulate(g), "add")
    tape = _tape_of(a, b)
    _check_broadcast(a, b, ElementwiseKind.ADD)

    def _backward(g):
        a.accumulate(_reduce_to(g, a.shape))
        b.accumulate(_reduce_to(g, b.shape))

    return tape.record(a.value + b.value, (a, b), _backward, "add")


def sub(a: DiffValue, b: Operand) -> DiffValue:
    if isinstance(b, Real):
        offset = float(b)
        return a.tape.record(a.value - offset, (a,), lambda g: a.accumulate(g), "sub")
    tape = _tape_of(a, b)
    _check_broadcast(a, b, ElementwiseKind.SUB)

    def _backward(g):
        a.accumulate(_reduce_to(g, a.shape))
        b.accumulate(_reduce_to(-g, b.shape))

    return tape.record(a.value - b.value, (a, b), _backward, "sub")


def hadamard(a: DiffValue, b: Operand) -> DiffValue:
    if isinstance(b, Real):
        return scale(a, b)
    tape = _tape_of(a, b)
    _check_broadcast(a, b, ElementwiseKind.HADAMARD)
    av, bv = a.value, b.value

    def _backward(g):
        a.accumulate(_reduce_to(g * bv, a.shape))
        b.accumulate(_reduce_to(g * av, b.shape))

    return tape.record(av * bv, (a, b), _backward, "hadamard")


def scale(a: DiffValue, s: Operand) -> DiffValue:
    if isinstance(s, DiffValue):
        if s.shape != ():
            raise ShapeError("scale needs a scalar factor", s.shape)
        return hadamard(a, s)
    if not isinstance(s, Real):
        raise ContractError(f"scale factor must be a real number, got {type(s).__name__}")
    factor = float(s)
    return a.tape.record(a.value * factor, (a,), lambda g: a.accumulate(g * factor), "scale")


def gelu(a: DiffValue) -> DiffValue:
    """Exact GELU, x·Φ(x) with the error-function CDF."""
    x = a.value
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))

    def _backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        a.accumulate(g * (cdf + x * pdf))

    return a.tape.record(x * cdf, (a,), _backward, "gelu")


def conv1x1(x: DiffValue, w: DiffValue, bias: Optional[DiffValue] = None) -> DiffValue:
    """Point-wise channel mix: y[b,o,...] = Σ_c w[o,c]·x[b,c,...] + bias[o]."""
    tape = _tape_of(x, w, *(() if bias is None else (bias,)))
    if x.ndim < 2 or w.ndim != 2 or w.shape[1] != x.shape[1]:
        raise ShapeError("conv1x1 weight must be C_out×C_in with C_in matching the input channels",
                         x.shape, w.shape)
    if bias is not None and bias.shape != (w.shape[0],):
        raise ShapeError("conv1x1 bias must have one entry per output channel", bias.shape, w.shape)
    xv, wv = x.value, w.value
    y = np.moveaxis(np.tensordot(wv, xv, axes=([1], [1])), 0, 1)
    bias_shape = (1, wv.shape[0]) + (1,) * (xv.ndim - 2)
    if bias is not None:
        y = y + bias.value.reshape(bias_shape)
    sum_axes = tuple(i for i in range(xv.ndim) if i != 1)

    def _backward(g):
        x.accumulate(np.moveaxis(np.tensordot(wv, g, axes=([0], [1])), 0, 1))
        w.accumulate(np.tensordot(g, xv, axes=(sum_axes, sum_axes)))
        if bias is not None:
            bias.accumulate(g.sum(axis=sum_axes))

    parents = (x, w) if bias is None else (x, w, bias)
    return tape.record(np.ascontiguousarray(y), parents, _backward, "conv1x1")


def axis_matmul(x: DiffValue, w: DiffValue, axis: int) -> DiffValue:
    """Contract spatial axis `axis` of x against a per-channel I×O matrix."""
    tape = _tape_of(x, w)
    spatial_rank = x.ndim - 2
    if not 0 <= axis < spatial_rank:
        raise ShapeError(f"axis {axis} is out of range for {spatial_rank} spatial axes", x.shape)
    target = axis + 2
    if w.ndim != 3 or w.shape[0] != x.shape[1] or w.shape[1] != x.shape[target]:
        raise ShapeError(f"axis_matmul weight must be C×I×O matching channels and axis {axis}", x.shape, w.shape)
    xv, wv = x.value, w.value
    batch, channels = xv.shape[:2]
    moved = np.moveaxis(xv, target, -1)
    rest = moved.shape[2:-1]
    flat = moved.reshape(batch, channels, -1, wv.shape[1])
    out = np.matmul(flat, wv[None])
    y = np.moveaxis(out.reshape((batch, channels) + rest + (wv.shape[2],)), -1, target)

    def _backward(g):
        g_flat = np.moveaxis(g, target, -1).reshape(batch, channels, -1, wv.shape[2])
        gx = np.matmul(g_flat, np.swapaxes(wv, 1, 2)[None])
        x.accumulate(np.moveaxis(gx.reshape((batch, channels) + rest + (wv.shape[1],)), -1, target))
        lhs = np.swapaxes(flat, 0, 1).reshape(channels, -1, wv.shape[1])
        rhs = np.swapaxes(g_flat, 0, 1).reshape(channels, -1, wv.shape[2])
        w.accumulate(np.matmul(np.swapaxes(lhs, 1, 2), rhs))

    return tape.record(np.ascontiguousarray(y), (x, w), _backward, "axis_matmul")


def shift(values: np.ndarray, offsets: Sequence[int], wrap: bool) -> np.ndarray:
    """out[..., i, j] = values[..., i + offsets[0], j + offsets[1]] over the trailing axes."""
    axes = tuple(range(values.ndim - len(offsets), values.ndim))
    if wrap:
        return np.roll(values, shift=[-d for d in offsets], axis=axes)
    out = np.zeros_like(values)
    dst = [slice(None)] * values.ndim
    src = [slice(None)] * values.ndim
    for axis, d in zip(axes, offsets):
        length = values.shape[axis]
        if abs(d) >= length:
            return out
        if d >= 0:
            dst[axis], src[axis] = slice(0, length - d), slice(d, length)
        else:
            dst[axis], src[axis] = slice(-d, length), slice(0, length + d)
    out[tuple(dst)] = values[tuple(src)]
    return out


def stencil_apply(x: DiffValue, kernel: StencilKernel, delta: float) -> DiffValue:
    if x.ndim < 4:
        raise ShapeError("stencil_apply expects a B×C×H×W tensor", x.shape)
    factor = 1.0 / delta ** 2 if kernel.scale_by_delta_sq else 1.0
    xv = x.value
    pairs = list(zip(kernel.offsets, kernel.coefficients))

    if kernel.boundary_mode == StencilBoundary.PERIODIC_WRAP:
        y = np.zeros_like(xv)
        for offset, coefficient in pairs:
            y += coefficient * shift(xv, offset, wrap=True)
        y *= factor

        def _backward(g):
            gx = np.zeros_like(g)
            for offset, coefficient in pairs:
                gx += coefficient * shift(g, (-offset[0], -offset[1]), wrap=True)
            x.accumulate(gx * factor)

        return x.tape.record(y, (x,), _backward, "stencil")

    r = kernel.reach
    height, width = xv.shape[-2:]
    if height < 2 * r + 1 or width < 2 * r + 1:
        raise SizeError(f"grid {height}x{width} is smaller than the stencil reach {r} allows")
    out_h, out_w = height - 2 * r, width - 2 * r

    def window(offset):
        di, dj = offset
        return (Ellipsis, slice(r + di, r + di + out_h), slice(r + dj, r + dj + out_w))

    y = np.zeros(xv.shape[:-2] + (out_h, out_w))
    for offset, coefficient in pairs:
        y += coefficient * xv[window(offset)]
    y *= factor

    def _backward(g):
        gx = np.zeros_like(xv)
        for offset, coefficient in pairs:
            gx[window(offset)] += coefficient * factor * g
        x.accumulate(gx)

    return x.tape.record(y, (x,), _backward, "stencil")


def conv2d_dilated(x: DiffValue, w: DiffValue, dilation: int, boundary_mode: ConvBoundary) -> DiffValue:
    """3×3 dilated cross-correlation with same-size output."""
    tape = _tape_of(x, w)
    if dilation < 1:
        raise ContractError(f"dilation must be at least 1, got {dilation}")
    if x.ndim != 4 or w.ndim != 4 or w.shape[2:] != (3, 3) or w.shape[1] != x.shape[1]:
        raise ShapeError("conv2d_dilated expects B×C_in×H×W input and C_out×C_in×3×3 weights", x.shape, w.shape)
    wrap = boundary_mode == ConvBoundary.PERIODIC_WRAP
    xv, wv = x.value, w.value
    taps = [(a, b, ((a - 1) * dilation, (b - 1) * dilation)) for a in range(3) for b in range(3)]
    shifted = {(a, b): shift(xv, offset, wrap) for a, b, offset in taps}

    y = np.zeros((xv.shape[0], wv.shape[0]) + xv.shape[2:])
    for a, b, _ in taps:
        y += np.moveaxis(np.tensordot(wv[:, :, a, b], shifted[a, b], axes=([1], [1])), 0, 1)

    def _backward(g):
        gx = np.zeros_like(xv)
        gw = np.zeros_like(wv)
        for a, b, (di, dj) in taps:
            mixed = np.moveaxis(np.tensordot(wv[:, :, a, b], g, axes=([0], [1])), 0, 1)
            gx += shift(mixed, (-di, -dj), wrap)
            gw[:, :, a, b] = np.tensordot(g, shifted[a, b], axes=((0, 2, 3), (0, 2, 3)))
        x.accumulate(gx)
        w.accumulate(gw)

    return tape.record(y, (x, w), _backward, "conv2d_dilated")


def mean_square(x: DiffValue) -> DiffValue:
    if x.value.size == 0:
        raise SizeError("mean_square of an empty tensor")
    xv = x.value
    count = xv.size

    def _backward(g):
        x.accumulate(g * 2.0 * xv / count)

    return x.tape.record(np.asarray(np.mean(xv * xv)), (x,), _backward, "mean_square")


def reshape(x: DiffValue, shape: Sequence[int]) -> DiffValue:
    original = x.shape
    try:
        y = x.value.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"cannot reshape: {exc}", original, tuple(shape)) from None
    return x.tape.record(y, (x,), lambda g: x.accumulate(g.reshape(original)), "reshape")


def transpose(x: DiffValue, axes: Sequence[int]) -> DiffValue:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"invalid axis permutation {axes}", x.shape)
    inverse = tuple(np.argsort(axes))
    return x.tape.record(np.ascontiguousarray(np.transpose(x.value, axes)), (x,),
                         lambda g: x.accumulate(np.transpose(g, inverse)), "transpose")


def select(x: DiffValue, index: int, axis: int) -> DiffValue:
    """Take one slice along `axis`, dropping that axis."""
    if not 0 <= axis < x.ndim or not 0 <= index < x.shape[axis]:
        raise ShapeError(f"cannot select index {index} on axis {axis}", x.shape)
    where = (slice(None),) * axis + (index,)

    def _backward(g):
        gx = np.zeros_like(x.value)
        gx[where] = g
        x.accumulate(gx)

    return x.tape.record(np.ascontiguousarray(x.value[where]), (x,), _backward, "select")


def channel_scale(x: DiffValue, s: DiffValue) -> DiffValue:
    """y[b,c,...] = s[c]·x[b,c,...]."""
    tape = _tape_of(x, s)
    if x.ndim < 2 or s.shape != (x.shape[1],):
        raise ShapeError("channel_scale needs one weight per channel", x.shape, s.shape)
    xv, sv = x.value, s.value
    view = (1, sv.shape[0]) + (1,) * (xv.ndim - 2)
    sum_axes = tuple(i for i in range(xv.ndim) if i != 1)

    def _backward(g):
        x.accumulate(g * sv.reshape(view))
        s.accumulate((g * xv).sum(axis=sum_axes))

    return tape.record(xv * sv.reshape(view), (x, s), _backward, "channel_scale")


def pad_zero(x: DiffValue, width: int = 1) -> DiffValue:
    """Surround the spatial axes with `width` frozen zeros."""
    if width < 0:
        raise ContractError("pad width must be non-negative")
    pads = [(0, 0), (0, 0)] + [(width, width)] * (x.ndim - 2)
    crop = (slice(None), slice(None)) + tuple(slice(width, size + width) for size in x.shape[2:])
    return x.tape.record(np.pad(x.value, pads), (x,), lambda g: x.accumulate(g[crop]), "pad_zero")
