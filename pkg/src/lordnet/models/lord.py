"""
Multi-channel fully-connected layers and their low-rank factorizations.

A multi-channel fully-connected layer maps each channel of X (C×N) through its own
dense M×N matrix. The factored layer replaces W_c by
Σ_r η_{c,r} A_{c,r,1} ⊗ A_{c,r,2} (⊗ A_{c,r,3}), evaluated as one axis contraction per
spatial axis so the dense weight never exists.
"""

import string
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from ..config import defaults
from ..dataclasses import ModuleOrdering
from ..errors import ShapeError, SizeError
from ..tensor_core import ops
from ..tensor_core.field import as_field
from ..tensor_core.tape import DiffValue, Tape

Tensor = Union[DiffValue, np.ndarray]


def _array(value: Tensor) -> np.ndarray:
    return value.value if isinstance(value, DiffValue) else np.asarray(value, dtype=np.float64)


@dataclass
class McfcWeights:
    """Dense per-channel weight W, C×M×N."""
    w: Tensor

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(_array(self.w).shape)

    @property
    def parameter_count(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class LowRankVecWeights:
    """W_c = Σ_r σ_{c,r} a_{c,r} ⊗ b_{c,r} with σ: C×R, a: C×R×M, b: C×R×N."""
    sigma: Tensor
    a: Tensor
    b: Tensor

    @property
    def parameter_count(self) -> int:
        return sum(_array(t).size for t in (self.sigma, self.a, self.b))


@dataclass
class LordFactorWeights:
    """η: C×R and one C×R×I_i×O_i factor per spatial axis."""
    eta: Tensor
    factors: Tuple[Tensor, ...]

    @property
    def channels(self) -> int:
        return _array(self.eta).shape[0]

    @property
    def rank(self) -> int:
        return _array(self.eta).shape[1]

    @property
    def in_shape(self) -> Tuple[int, ...]:
        return tuple(_array(a).shape[2] for a in self.factors)

    @property
    def out_shape(self) -> Tuple[int, ...]:
        return tuple(_array(a).shape[3] for a in self.factors)

    @property
    def parameter_count(self) -> int:
        """C·R·Σ_i I_i·O_i; η is not counted."""
        return factored_parameter_count(self.channels, self.rank, self.in_shape, self.out_shape)


@dataclass
class CpFactors:
    """Rank-1 factor matrices A_{c,r,i} = a_{c,r,i} ⊗ b_{c,r,i}."""
    eta: np.ndarray
    inputs: Tuple[np.ndarray, ...]
    outputs: Tuple[np.ndarray, ...]

    def to_factor_weights(self) -> LordFactorWeights:
        factors = tuple(
            as_field(np.einsum("cri,cro->crio", a, b)) for a, b in zip(self.inputs, self.outputs)
        )
        return LordFactorWeights(eta=as_field(self.eta), factors=factors)


@dataclass
class LordModuleParams:
    """
    One Lord module: point-wise embedding (conv1x1, GELU, conv1x1), the factored spatial
    layer, a channel mixer and the learned shortcut f₁.
    """
    embed_in_w: DiffValue
    embed_in_b: DiffValue
    embed_out_w: DiffValue
    embed_out_b: DiffValue
    factors: LordFactorWeights
    mixer_w: DiffValue
    mixer_b: DiffValue
    shortcut_w: DiffValue
    shortcut_b: DiffValue
    ordering: ModuleOrdering = field(default=ModuleOrdering.EMBED_MIX_LORD)


def dense_parameter_count(channels: int, in_size: int, out_size: int) -> int:
    return channels * out_size * in_size


def lowrank_vec_parameter_count(channels: int, rank: int, in_size: int, out_size: int) -> int:
    """C·R·(M + N), singular values not counted."""
    return channels * rank * (out_size + in_size)


def cp_parameter_count(channels: int, rank: int, in_shape: Sequence[int], out_shape: Sequence[int]) -> int:
    return channels * rank * sum(i + o for i, o in zip(in_shape, out_shape))


def factored_parameter_count(channels: int, rank: int, in_shape: Sequence[int], out_shape: Sequence[int]) -> int:
    return channels * rank * sum(i * o for i, o in zip(in_shape, out_shape))


def mcfc_dense_forward(x: DiffValue, w: McfcWeights, out_shape: Sequence[int] = None) -> DiffValue:
    """
    Y_{b,c,m} = Σ_n W_{c,m,n} X_{b,c,n}.

    Spatial axes of x are flattened row-major; `out_shape` restores them on the output.
    """
    batch, channels = x.shape[:2]
    flat = ops.reshape(x, (batch, channels, -1)) if x.ndim != 3 else x
    weight = w.w
    if weight.ndim != 3 or weight.shape[0] != channels or weight.shape[2] != flat.shape[2]:
        raise ShapeError("dense weight must be C×M×N matching the input", x.shape, weight.shape)
    y = ops.axis_matmul(flat, ops.transpose(weight, (0, 2, 1)), 0)
    if out_shape is not None:
        y = ops.reshape(y, (batch, channels) + tuple(out_shape))
    return y


def lowrank_vec_forward(x: DiffValue, p: LowRankVecWeights) -> DiffValue:
    """Y_c = Σ_r σ_{c,r} a_{c,r} (b_{c,r} · X_c) on flattened spatial axes."""
    batch, channels = x.shape[:2]
    flat = ops.reshape(x, (batch, channels, -1)) if x.ndim != 3 else x
    if p.b.shape[0] != channels or p.b.shape[2] != flat.shape[2] or p.a.shape[:2] != p.b.shape[:2]:
        raise ShapeError("low-rank vectors do not match the input", x.shape, p.a.shape, p.b.shape)
    rank, out_size, in_size = p.a.shape[1], p.a.shape[2], p.b.shape[2]

    total = None
    for r in range(rank):
        b_r = ops.reshape(ops.select(p.b, r, 1), (channels, in_size, 1))
        a_r = ops.reshape(ops.select(p.a, r, 1), (channels, 1, out_size))
        term = ops.axis_matmul(ops.axis_matmul(flat, b_r, 0), a_r, 0)
        term = ops.channel_scale(term, ops.select(p.sigma, r, 1))
        total = term if total is None else ops.add(total, term)
    return total


def lord_forward(x: DiffValue, p: LordFactorWeights) -> DiffValue:
    """Σ_r η_r · (x contracted with A_{r,1}, then A_{r,2}, ...) along the spatial axes in order."""
    spatial = x.ndim - 2
    if len(p.factors) != spatial:
        raise ShapeError(f"{len(p.factors)} factors for {spatial} spatial axes", x.shape)
    if p.channels != x.shape[1]:
        raise ShapeError("factored layer channels do not match the input", x.shape, _array(p.eta).shape)

    total = None
    for r in range(p.rank):
        y = x
        for axis, factor in enumerate(p.factors):
            y = ops.axis_matmul(y, ops.select(factor, r, 1), axis)
        y = ops.channel_scale(y, ops.select(p.eta, r, 1))
        total = y if total is None else ops.add(total, y)
    return total


def lord2d_forward(x: DiffValue, p: LordFactorWeights) -> DiffValue:
    if x.ndim != 4 or len(p.factors) != 2:
        raise ShapeError("lord2d expects a B×C×I₁×I₂ input and two factors", x.shape)
    return lord_forward(x, p)


def lord3d_forward(x: DiffValue, p: LordFactorWeights) -> DiffValue:
    if x.ndim != 5 or len(p.factors) != 3:
        raise ShapeError("lord3d expects a B×C×I₁×I₂×I₃ input and three factors", x.shape)
    return lord_forward(x, p)


def materialize_dense(p: LordFactorWeights) -> McfcWeights:
    """Explicit W_c = Σ_r η_{c,r} A_{c,r,1}ᵀ ⊗ A_{c,r,2}ᵀ (⊗ ...), row-major over the spatial axes."""
    in_size = int(np.prod(p.in_shape))
    out_size = int(np.prod(p.out_shape))
    if p.channels * in_size * out_size > defaults.MAX_DENSE_ENTRIES:
        raise SizeError(f"dense weight would hold {p.channels * in_size * out_size} entries")

    eta = _array(p.eta)
    factors = [_array(a) for a in p.factors]
    w = np.zeros((p.channels, out_size, in_size))
    for c in range(p.channels):
        for r in range(p.rank):
            block = np.ones((1, 1))
            for factor in factors:
                block = np.kron(block, factor[c, r].T)
            w[c] += eta[c, r] * block
    return McfcWeights(as_field(w))


def cp_direct(x: np.ndarray, cp: CpFactors) -> np.ndarray:
    """Y_{c,o…} = Σ_r η_{c,r} Π_i b_{c,r,i,o_i} Σ_{i…} Π_i a_{c,r,i,i_i} X_{c,i…}."""
    spatial = len(cp.inputs)
    ins = string.ascii_lowercase[:spatial]
    outs = string.ascii_lowercase[spatial: 2 * spatial]
    project = f"BC{ins}," + ",".join(f"Cr{letter}" for letter in ins) + "->BCr"
    scores = np.einsum(project, x, *cp.inputs)
    expand = "Cr,BCr," + ",".join(f"Cr{letter}" for letter in outs) + f"->BC{outs}"
    return np.einsum(expand, cp.eta, scores, *cp.outputs)


def cp_specialization_check(cp: CpFactors, x: np.ndarray) -> float:
    """Max abs deviation between the factored layer on rank-1 factor matrices and the direct CP sum."""
    tape = Tape()
    weights = cp.to_factor_weights()
    p = LordFactorWeights(
        eta=tape.constant(weights.eta),
        factors=tuple(tape.constant(a) for a in weights.factors),
    )
    factored = lord_forward(tape.constant(x), p).value
    direct = cp_direct(np.asarray(x, dtype=np.float64), cp)
    return float(np.max(np.abs(factored - direct))) if factored.size else 0.0


def embed(x: DiffValue, p: LordModuleParams) -> DiffValue:
    hidden = ops.gelu(ops.conv1x1(x, p.embed_in_w, p.embed_in_b))
    return ops.conv1x1(hidden, p.embed_out_w, p.embed_out_b)


def lord_module_forward(x: DiffValue, p: LordModuleParams) -> DiffValue:
    """y = f₁(x) + branch(x), the branch being embed → factored → mixer or embed → mixer → factored."""
    if x.ndim < 4 or x.shape[1] != p.shortcut_w.shape[1]:
        raise ShapeError("module input channels do not match the shortcut", x.shape, p.shortcut_w.shape)
    h = embed(x, p)
    if p.ordering == ModuleOrdering.EMBED_LORD_MIX:
        branch = ops.conv1x1(lord_forward(h, p.factors), p.mixer_w, p.mixer_b)
    else:
        branch = lord_forward(ops.conv1x1(h, p.mixer_w, p.mixer_b), p.factors)
    return ops.add(ops.conv1x1(x, p.shortcut_w, p.shortcut_b), branch)
