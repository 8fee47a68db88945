"""
Dense float64 fields and fixed-coefficient stencil kernels.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from ..errors import ContractError, ShapeError

# Channel-first (optionally batch-first) float64 array. Library code hands out read-only copies.
Field = npt.NDArray[np.float64]


def as_field(data, shape: Optional[Sequence[int]] = None, writeable: bool = False) -> Field:
    """Copy `data` into a contiguous float64 field, optionally checking its shape."""
    array = np.array(data, dtype=np.float64, order="C", copy=True)
    if shape is not None and tuple(array.shape) != tuple(shape):
        raise ShapeError("field does not have the expected shape", array.shape, tuple(shape))
    array.setflags(write=writeable)
    return array


def is_finite(field: Field) -> bool:
    return bool(np.all(np.isfinite(field)))


class StencilBoundary(Enum):
    PERIODIC_WRAP = "periodic_wrap"
    DIRICHLET_INTERIOR_ONLY = "dirichlet_interior_only"


@dataclass(frozen=True)
class StencilKernel:
    """
    Cross-correlation kernel with constant coefficients over the two trailing axes.

    `offsets[k]` is the (axis-0, axis-1) displacement read by `coefficients[k]`. In
    dirichlet_interior_only mode the output covers interior points only.
    """
    offsets: Tuple[Tuple[int, int], ...]
    coefficients: Tuple[float, ...]
    boundary_mode: StencilBoundary
    scale_by_delta_sq: bool = True

    def __post_init__(self):
        if len(self.offsets) != len(self.coefficients):
            raise ContractError(
                f"stencil has {len(self.offsets)} offsets but {len(self.coefficients)} coefficients"
            )
        if any(len(offset) != 2 for offset in self.offsets):
            raise ContractError("stencil offsets must be 2D")

    @property
    def reach(self) -> int:
        return max((max(abs(di), abs(dj)) for di, dj in self.offsets), default=0)


FIVE_POINT_OFFSETS = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
FIVE_POINT_COEFFICIENTS = (-4.0, 1.0, 1.0, 1.0, 1.0)


def laplacian_5pt(boundary_mode: StencilBoundary) -> StencilKernel:
    """Second-order central-difference Laplacian, scaled by 1/Δ²."""
    return StencilKernel(FIVE_POINT_OFFSETS, FIVE_POINT_COEFFICIENTS, boundary_mode)
