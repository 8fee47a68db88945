"""
Differentiable residuals of the discrete PDE systems and the losses built on them.

Residual fields cover the equation set of their problem: interior points for walled
grids, every point for periodic ones. Network tensors are B×1×h×w.
"""

import numpy as np

from . import fdm
from .dataclasses import GridSpec, ResidualKind, ResidualSpec
from .errors import ContractError, ShapeError
from .randfield import mean_project
from .tensor_core import ops
from .tensor_core.field import StencilBoundary, laplacian_5pt
from .tensor_core.tape import DiffValue


def _stencil_for(grid: GridSpec):
    if grid.is_periodic:
        return laplacian_5pt(StencilBoundary.PERIODIC_WRAP)
    return laplacian_5pt(StencilBoundary.DIRICHLET_INTERIOR_ONLY)


def _check_prediction(value: DiffValue, spec: ResidualSpec, name: str) -> None:
    if value.ndim != 4 or value.shape[1] != 1 or value.shape[2:] != spec.field_shape:
        raise ShapeError(f"{name} must be B×1×{spec.field_shape[0]}×{spec.field_shape[1]}", value.shape)


def equation_view(field, grid: GridSpec) -> np.ndarray:
    """Restrict full-grid fields to the equation set; equation-set fields pass through."""
    array = np.asarray(field, dtype=np.float64)
    if not grid.is_periodic and array.shape[-2:] == grid.shape:
        return array[..., 1:-1, 1:-1]
    return array


def discrete_laplacian(u: DiffValue, grid: GridSpec) -> DiffValue:
    """∇²_h of an equation-set tensor, the frozen zero walls padded back in first."""
    if not grid.is_periodic:
        u = ops.pad_zero(u, 1)
    return ops.stencil_apply(u, _stencil_for(grid), grid.delta)


def poisson_residual(u_hat: DiffValue, f, spec: ResidualSpec) -> DiffValue:
    """r = ∇²_h û + f on the equation set; f is mean-projected on periodic grids."""
    if not spec.kind.is_poisson:
        raise ContractError(f"poisson_residual cannot evaluate {spec.kind.value}")
    _check_prediction(u_hat, spec, "u_hat")
    forcing = equation_view(f, spec.grid)
    if forcing.ndim == 2:
        forcing = np.broadcast_to(forcing, u_hat.shape)
    if forcing.shape != u_hat.shape:
        raise ShapeError("forcing does not match the prediction", forcing.shape, u_hat.shape)
    if spec.grid.is_periodic:
        forcing = forcing - forcing.mean(axis=(-2, -1), keepdims=True)
    return ops.add(discrete_laplacian(u_hat, spec.grid), u_hat.tape.constant(forcing))


def euler_target(psi_t, spec: ResidualSpec) -> np.ndarray:
    """
    EulerUpdate(ω(ψ_t), ψ_t) on the equation set for a batch of equation-set states.

    The periodic target is mean-projected, matching what the Poisson solve sees.
    """
    grid = spec.grid
    states = np.asarray(psi_t, dtype=np.float64)
    targets = np.empty_like(states)
    for index in np.ndindex(states.shape[:-2]):
        psi = states[index]
        if not grid.is_periodic:
            psi = np.pad(psi, 1)
        omega = fdm.vorticity_from_stream(psi, grid)
        updated = equation_view(fdm.euler_update(omega, psi, grid, spec.ns), grid)
        targets[index] = mean_project(updated) if grid.is_periodic else updated
    return targets


def ns_residual(psi_t, psi_next: DiffValue, spec: ResidualSpec) -> DiffValue:
    """
    r = ω(ψ_{t+1}) − EulerUpdate(ω(ψ_t), ψ_t) on the equation set.

    ψ_t enters as a tape constant: no gradient flows back to the network input.
    """
    if spec.kind.is_poisson:
        raise ContractError(f"ns_residual cannot evaluate {spec.kind.value}")
    _check_prediction(psi_next, spec, "psi_next")
    states = np.asarray(psi_t.value if isinstance(psi_t, DiffValue) else psi_t, dtype=np.float64)
    if states.shape != psi_next.shape:
        raise ShapeError("psi_t and psi_next must have the same shape", states.shape, psi_next.shape)
    vorticity = ops.scale(discrete_laplacian(psi_next, spec.grid), -1.0)
    return ops.sub(vorticity, psi_next.tape.constant(euler_target(states, spec)))


def residual(prediction: DiffValue, data, spec: ResidualSpec) -> DiffValue:
    """Dispatch on the residual kind: `data` is the forcing for Poisson, ψ_t for Navier-Stokes."""
    if spec.kind.is_poisson:
        return poisson_residual(prediction, data, spec)
    return ns_residual(data, prediction, spec)


def msr_loss(residual_field: DiffValue) -> DiffValue:
    return ops.mean_square(residual_field)


def mse_loss(pred: DiffValue, target) -> DiffValue:
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ShapeError("prediction and target shapes differ", pred.shape, target.shape)
    return ops.mean_square(ops.sub(pred, pred.tape.constant(target)))


__all__ = [
    "ResidualKind", "ResidualSpec", "discrete_laplacian", "equation_view", "euler_target",
    "msr_loss", "mse_loss", "ns_residual", "poisson_residual", "residual",
]
