"""
Finite-difference reference solvers.

Sign convention: the Poisson solvers solve -∇²_h u = f, so the conjugate-gradient
operator is symmetric positive definite. Dirichlet and lid-driven fields are stored on
the full n×n node grid with the walls frozen; periodic fields wrap.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .config import defaults
from .dataclasses import GridSpec, NsParams
from .errors import ContractError, NotConvergedError, ShapeError, SizeError
from .randfield import mean_project
from .tensor_core.field import Field, as_field

logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CgResult:
    x: Field
    final_residual: float
    iters: int
    converged: bool


def cg_solve(apply_A: LinearMap, b, tol: float = defaults.CG_TOL, max_iter: Optional[int] = None) -> CgResult:
    """
    Conjugate gradient for a symmetric positive (semi-)definite operator.

    Stops once ‖A x − b‖₂ ≤ tol·‖b‖₂, checked against the recomputed true residual. A
    run that hits max_iter comes back with converged=False and the relative residual
    it reached; callers decide whether that is fatal.
    """
    if tol <= 0:
        raise ContractError(f"tol must be positive, got {tol}")
    b = np.asarray(b, dtype=np.float64)
    if max_iter is None:
        max_iter = defaults.CG_MAX_ITER_FACTOR * max(b.size, 1)

    x = np.zeros_like(b)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CgResult(as_field(x), 0.0, 0, True)

    target = tol * b_norm
    r = b.copy()
    p = r.copy()
    rr = float(np.vdot(r, r))
    iters = 0
    converged = False
    while iters < max_iter:
        Ap = apply_A(p)
        curvature = float(np.vdot(p, Ap))
        if curvature <= 0.0:
            logger.debug("cg: non-positive curvature at iteration %d", iters)
            break
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * Ap
        iters += 1
        rr_next = float(np.vdot(r, r))
        if math.sqrt(rr_next) <= target:
            r = b - apply_A(x)
            rr_next = float(np.vdot(r, r))
            if math.sqrt(rr_next) <= target:
                converged = True
                break
            # Recurrence drifted from the true residual; restart from it.
            p = r.copy()
            rr = rr_next
            continue
        p = r + (rr_next / rr) * p
        rr = rr_next

    final = float(np.linalg.norm(b - apply_A(x))) / b_norm
    logger.debug("cg: %d iterations, relative residual %.3e", iters, final)
    return CgResult(as_field(x), final, iters, converged or final <= tol)


def _check_grid_field(field, grid: GridSpec, name: str) -> np.ndarray:
    array = np.asarray(field, dtype=np.float64)
    if array.shape != grid.shape:
        raise ShapeError(f"{name} must cover the full {grid.n}x{grid.n} grid", array.shape, grid.shape)
    return array


def _neighbours(x: np.ndarray, periodic: bool):
    """Centre, i+1, i-1, j+1, j-1 views; interior only for wall-bounded grids."""
    if periodic:
        return (x, np.roll(x, -1, axis=0), np.roll(x, 1, axis=0),
                np.roll(x, -1, axis=1), np.roll(x, 1, axis=1))
    return x[1:-1, 1:-1], x[2:, 1:-1], x[:-2, 1:-1], x[1:-1, 2:], x[1:-1, :-2]


def laplacian(x: np.ndarray, grid: GridSpec) -> np.ndarray:
    """5-point ∇²_h on the equation set (all points if periodic, interior otherwise)."""
    c, ip, im, jp, jm = _neighbours(x, grid.is_periodic)
    return (ip + im + jp + jm - 4.0 * c) / grid.delta ** 2


def _pad_interior(interior: np.ndarray) -> np.ndarray:
    return np.pad(interior, 1)


def poisson_solve(f, grid: GridSpec, tol: float = defaults.CG_TOL, max_iter: Optional[int] = None) -> Field:
    """
    Solve -∇²_h u = f on the full grid.

    Dirichlet and lid-driven grids keep u = 0 on the walls and read f on interior
    points only. Periodic grids mean-project f and return the zero-mean solution.
    """
    f = _check_grid_field(f, grid, "forcing")
    if max_iter is None:
        max_iter = defaults.CG_MAX_ITER_FACTOR * grid.n ** 2

    if grid.is_periodic:
        rhs = mean_project(f)
        result = cg_solve(lambda v: -laplacian(v, grid), rhs, tol, max_iter)
        u = result.x - result.x.mean()
    else:
        rhs = f[1:-1, 1:-1]
        result = cg_solve(lambda v: -laplacian(_pad_interior(v), grid), rhs, tol, max_iter)
        u = _pad_interior(result.x)

    if not result.converged:
        raise NotConvergedError(result.final_residual, result.iters, tol)
    return as_field(u)


def vorticity_from_stream(psi, grid: GridSpec) -> Field:
    """
    ω = -∇²_h ψ on the equation set, plus the wall rows for bounded grids.

    The stationary walls are written first and the moving lid (j = n-1) last, so the
    lid corners carry the lid-speed term.
    """
    psi = _check_grid_field(psi, grid, "stream function")
    if grid.is_periodic:
        return as_field(-laplacian(psi, grid))

    scale = 2.0 / grid.delta ** 2
    omega = np.zeros_like(psi)
    omega[1:-1, 1:-1] = -laplacian(psi, grid)
    omega[:, 0] = -scale * psi[:, 1]
    omega[0, :] = -scale * psi[1, :]
    omega[-1, :] = -scale * psi[-2, :]
    omega[:, -1] = -scale * psi[:, -2] - 2.0 * grid.lid_speed / grid.delta
    return as_field(omega)


def euler_update(omega, psi, grid: GridSpec, p: NsParams) -> Field:
    """
    One forward-Euler step of the vorticity transport equation.

    Uses the central-difference Jacobian with its 1/(4Δ²) factor and the 5-point viscous
    term. Wall rows of `omega` pass through unchanged.
    """
    omega = _check_grid_field(omega, grid, "vorticity")
    psi = _check_grid_field(psi, grid, "stream function")
    w, w_ip, w_im, w_jp, w_jm = _neighbours(omega, grid.is_periodic)
    _, s_ip, s_im, s_jp, s_jm = _neighbours(psi, grid.is_periodic)

    delta_sq = grid.delta ** 2
    jacobian = (s_jp - s_jm) * (w_ip - w_im) - (s_ip - s_im) * (w_jp - w_jm)
    viscous = w_ip + w_im + w_jp + w_jm - 4.0 * w
    updated = w - p.dt / (4.0 * delta_sq) * jacobian + p.dt / (p.reynolds * delta_sq) * viscous

    if grid.is_periodic:
        return as_field(updated)
    out = np.array(omega, copy=True)
    out[1:-1, 1:-1] = updated
    return as_field(out)


def refresh_wall_vorticity(omega, psi, grid: GridSpec) -> Field:
    """Interior of `omega` with the wall rows recomputed from `psi`."""
    omega = _check_grid_field(omega, grid, "vorticity")
    if grid.is_periodic:
        return as_field(omega)
    out = np.array(vorticity_from_stream(psi, grid), copy=True)
    out[1:-1, 1:-1] = omega[1:-1, 1:-1]
    return as_field(out)


def ns_step(omega_t, grid: GridSpec, p: NsParams, tol: float = defaults.CG_TOL) -> Tuple[Field, Field]:
    """Advance the vorticity one step; returns (ω^{t+1}, ψ^t)."""
    p.check_stability(grid)
    psi_t = poisson_solve(omega_t, grid, tol)
    omega_t = refresh_wall_vorticity(omega_t, psi_t, grid)
    omega_next = euler_update(omega_t, psi_t, grid, p)
    return omega_next, psi_t


def stream_step(psi, grid: GridSpec, p: NsParams, tol: float = defaults.CG_TOL) -> Field:
    """ψ^{k+1} from ψ^k: recover ω from ψ, take the Euler step, solve for the new ψ."""
    omega = vorticity_from_stream(psi, grid)
    return poisson_solve(euler_update(omega, psi, grid, p), grid, tol)


def ns_trajectory(omega_0, grid: GridSpec, p: NsParams, tol: float = defaults.CG_TOL) -> List[Field]:
    """[ψ⁰, …, ψ^steps] for the initial vorticity ω₀."""
    p.check_stability(grid)
    psi = poisson_solve(omega_0, grid, tol)
    trajectory = [psi]
    for _ in range(p.steps):
        psi = stream_step(psi, grid, p, tol)
        trajectory.append(psi)
    return trajectory


def ns_advance(omega_0, grid: GridSpec, p: NsParams, t_end: float, tol: float = defaults.CG_TOL) -> Field:
    """Stream function after integrating ω₀ up to time t_end."""
    steps = int(round(t_end / p.dt))
    if steps < 0:
        raise ContractError(f"t_end must be non-negative, got {t_end}")
    psi = poisson_solve(omega_0, grid, tol)
    for _ in range(steps):
        psi = stream_step(psi, grid, p, tol)
    return psi


def _second_difference(m: int, delta: float, periodic: bool) -> sp.csr_matrix:
    main = np.full(m, 2.0)
    off = np.full(m - 1, -1.0)
    matrix = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if periodic:
        matrix[0, m - 1] = -1.0
        matrix[m - 1, 0] = -1.0
    return (matrix / delta ** 2).tocsr()


def laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse -∇²_h on the equation set, rows in row-major order of the equation grid."""
    m = grid.equation_shape[0]
    second = _second_difference(m, grid.delta, grid.is_periodic)
    eye = sp.identity(m, format="csr")
    return (sp.kron(second, eye) + sp.kron(eye, second)).tocsr()


def inverse_operator_row(index: Union[int, Sequence[int]], grid: GridSpec) -> Field:
    """
    Row `index` of the inverse of -∇²_h, shaped as the equation grid.

    Periodic grids use the pseudo-inverse on the mean-zero subspace, obtained from the
    system bordered by the constant vector.
    """
    if grid.n > defaults.MAX_DENSE_INVERSE_N:
        raise SizeError(f"inverse operator rows are limited to n <= {defaults.MAX_DENSE_INVERSE_N}, got {grid.n}")
    shape = grid.equation_shape
    size = shape[0] * shape[1]
    if isinstance(index, (int, np.integer)):
        flat = int(index)
    else:
        i, j = index
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise ShapeError(f"index {tuple(index)} lies outside the equation grid", shape)
        flat = i * shape[1] + j
    if not 0 <= flat < size:
        raise ShapeError(f"index {index} lies outside the equation grid", shape)

    matrix = laplacian_matrix(grid)
    unit = np.zeros(size)
    unit[flat] = 1.0
    if grid.is_periodic:
        ones = sp.csr_matrix(np.ones((size, 1)))
        bordered = sp.bmat([[matrix, ones], [ones.T, None]], format="csc")
        rhs = np.append(unit - 1.0 / size, 0.0)
        row = spsolve(bordered, rhs)[:size]
    else:
        row = spsolve(matrix.tocsc(), unit)
    return as_field(np.asarray(row).reshape(shape))
