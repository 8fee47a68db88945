"""
Central finite-difference check of tape gradients.
"""

import logging
from typing import Callable, Dict, Tuple

import numpy as np

from ..dataclasses import ConvBoundary
from ..errors import ContractError
from . import ops
from .field import StencilBoundary, laplacian_5pt
from .tape import DiffValue, Tape

logger = logging.getLogger(__name__)

LossFn = Callable[[Tape, Dict[str, DiffValue]], DiffValue]
Builder = Callable[[np.random.Generator], Tuple[Dict[str, np.ndarray], LossFn]]


def _evaluate(loss_fn: LossFn, params: Dict[str, np.ndarray]) -> float:
    tape = Tape()
    handles = {name: tape.variable(value, name) for name, value in params.items()}
    return float(loss_fn(tape, handles).value)


def gradcheck(builder: Builder, seed: int, step: float = 1e-5) -> float:
    """
    Compare every parameter's tape gradient with central finite differences.

    Args:
        builder: Called with a seeded generator; returns the parameter arrays and a
            function that records the scalar loss on a fresh tape.
        seed: Seed of the generator handed to the builder.
        step: Finite-difference step.

    Returns:
        The largest relative deviation ‖g_tape − g_fd‖ / max(‖g_tape‖, ‖g_fd‖) over parameters.
    """
    params, loss_fn = builder(np.random.default_rng(seed))
    if not params:
        raise ContractError("gradcheck builder returned no parameters")

    tape = Tape()
    handles = {name: tape.variable(value, name) for name, value in params.items()}
    analytic = tape.backward(loss_fn(tape, handles))

    worst = 0.0
    for name, value in params.items():
        numeric = np.zeros_like(value, dtype=np.float64)
        for index in np.ndindex(value.shape):
            shifted = dict(params)
            plus = np.array(value, dtype=np.float64)
            plus[index] += step
            shifted[name] = plus
            upper = _evaluate(loss_fn, shifted)
            minus = np.array(value, dtype=np.float64)
            minus[index] -= step
            shifted[name] = minus
            lower = _evaluate(loss_fn, shifted)
            numeric[index] = (upper - lower) / (2.0 * step)

        scale = max(np.linalg.norm(analytic[name]), np.linalg.norm(numeric))
        deviation = 0.0 if scale == 0.0 else float(np.linalg.norm(analytic[name] - numeric) / scale)
        logger.debug("gradcheck %s: deviation %.3e", name, deviation)
        worst = max(worst, deviation)
    return worst


def readout_loss(tape: Tape, y: DiffValue, rng_seed: int = 7) -> DiffValue:
    # A fixed random readout keeps the loss sensitive to every output entry.
    weights = np.random.default_rng(rng_seed).standard_normal(y.shape)
    return ops.mean_square(ops.hadamard(y, tape.constant(weights)))


def _elementwise_builder(rng):
    params = {"a": rng.standard_normal((2, 3, 4)), "b": rng.standard_normal((2, 3, 4)),
              "s": rng.standard_normal(())}

    def loss_fn(tape, p):
        y = ops.add(p["a"], p["b"])
        y = ops.hadamard(ops.sub(y, p["b"]), p["b"])
        y = ops.scale(ops.scale(y, 0.5), p["s"])
        return readout_loss(tape, ops.gelu(y))
    return params, loss_fn


def _gelu_builder(rng):
    params = {"x": rng.standard_normal((1, 2, 5)) * 2.0}
    return params, lambda tape, p: readout_loss(tape, ops.gelu(p["x"]))


def _conv1x1_builder(rng):
    params = {"x": rng.standard_normal((2, 3, 4, 4)), "w": rng.standard_normal((2, 3)),
              "bias": rng.standard_normal(2)}
    return params, lambda tape, p: readout_loss(tape, ops.conv1x1(p["x"], p["w"], p["bias"]))


def _axis_matmul_builder(rng):
    params = {"x": rng.standard_normal((2, 2, 4, 3)), "w0": rng.standard_normal((2, 4, 5)),
              "w1": rng.standard_normal((2, 3, 2))}

    def loss_fn(tape, p):
        return readout_loss(tape, ops.axis_matmul(ops.axis_matmul(p["x"], p["w0"], 0), p["w1"], 1))
    return params, loss_fn


def _stencil_builder(rng):
    params = {"x": rng.standard_normal((1, 2, 5, 6))}

    def loss_fn(tape, p):
        periodic = ops.stencil_apply(p["x"], laplacian_5pt(StencilBoundary.PERIODIC_WRAP), 0.5)
        interior = ops.stencil_apply(p["x"], laplacian_5pt(StencilBoundary.DIRICHLET_INTERIOR_ONLY), 0.5)
        return ops.add(readout_loss(tape, periodic), readout_loss(tape, interior))
    return params, loss_fn


def _conv2d_builder(rng):
    params = {"x": rng.standard_normal((1, 2, 6, 5)), "w": rng.standard_normal((3, 2, 3, 3))}

    def loss_fn(tape, p):
        wrapped = ops.conv2d_dilated(p["x"], p["w"], 2, ConvBoundary.PERIODIC_WRAP)
        padded = ops.conv2d_dilated(p["x"], p["w"], 1, ConvBoundary.ZERO_PAD)
        return ops.add(readout_loss(tape, wrapped), readout_loss(tape, padded))
    return params, loss_fn


def _plumbing_builder(rng):
    params = {"x": rng.standard_normal((2, 3, 4, 2)), "s": rng.standard_normal(4)}

    def loss_fn(tape, p):
        y = ops.transpose(p["x"], (0, 2, 1, 3))
        y = ops.channel_scale(y, p["s"])
        y = ops.select(ops.reshape(y, (2, 4, 3, 2)), 1, 3)
        return readout_loss(tape, ops.pad_zero(y, 1))
    return params, loss_fn


OP_BUILDERS: Dict[str, Builder] = {
    "elementwise": _elementwise_builder,
    "gelu": _gelu_builder,
    "conv1x1": _conv1x1_builder,
    "axis_matmul": _axis_matmul_builder,
    "stencil_apply": _stencil_builder,
    "conv2d_dilated": _conv2d_builder,
    "plumbing": _plumbing_builder,
}
