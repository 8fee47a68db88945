from .field import Field, StencilBoundary, StencilKernel, as_field, is_finite, laplacian_5pt
from .gradcheck import OP_BUILDERS, gradcheck
from .ops import (
    ElementwiseKind,
    add,
    axis_matmul,
    channel_scale,
    conv1x1,
    conv2d_dilated,
    elementwise,
    gelu,
    hadamard,
    mean_square,
    pad_zero,
    reshape,
    scale,
    select,
    stencil_apply,
    sub,
    transpose,
)
from .tape import DiffValue, Tape, backward

__all__ = [
    "Field", "StencilBoundary", "StencilKernel", "as_field", "is_finite", "laplacian_5pt",
    "OP_BUILDERS", "gradcheck",
    "ElementwiseKind", "add", "axis_matmul", "channel_scale", "conv1x1", "conv2d_dilated",
    "elementwise", "gelu", "hadamard", "mean_square", "pad_zero", "reshape", "scale", "select",
    "stencil_apply", "sub", "transpose",
    "DiffValue", "Tape", "backward",
]
