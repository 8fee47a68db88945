"""
Sample generation for training and evaluation.

Every sample is identified by (base seed, split, index); the train and test splits
draw from disjoint seed streams.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from . import fdm
from .config import defaults
from .dataclasses import Boundary, EvalProtocol, EvalProtocolKind, GridSpec, RandomFieldParams, ResidualSpec
from .randfield import derive_seed, mean_project, sample_field
from .warm_start import WarmStartCache, compute_warm_states

logger = logging.getLogger(__name__)

TRAIN_SPLIT = 0
TEST_SPLIT = 1
BATCH_STREAM = 2
POOL_STREAM = 3


def to_equation(field, grid: GridSpec) -> np.ndarray:
    """Full-grid field to its equation-set view (interior for walled grids)."""
    array = np.asarray(field, dtype=np.float64)
    if grid.is_periodic:
        return array
    return array[..., 1:-1, 1:-1]


def to_full(field, grid: GridSpec) -> np.ndarray:
    array = np.asarray(field, dtype=np.float64)
    if grid.is_periodic:
        return array
    pads = [(0, 0)] * (array.ndim - 2) + [(1, 1), (1, 1)]
    return np.pad(array, pads)


def poisson_input(forcing, grid: GridSpec) -> np.ndarray:
    """Network input for a full-grid forcing: the equation-set view, mean-projected when periodic."""
    view = to_equation(forcing, grid)
    return np.asarray(mean_project(view)) if grid.is_periodic else view


def sample_forcing(params: RandomFieldParams, grid: GridSpec, base_seed: int, split: int, index: int) -> np.ndarray:
    return sample_field(params, grid, derive_seed(base_seed, split, index))


def poisson_inputs(params: RandomFieldParams, grid: GridSpec, base_seed: int, split: int,
                   start: int, count: int) -> np.ndarray:
    """count × h × w network inputs for sample indices start .. start+count-1."""
    return np.stack([
        poisson_input(sample_forcing(params, grid, base_seed, split, index), grid)
        for index in range(start, start + count)
    ]) if count else np.zeros((0,) + grid.equation_shape)


def poisson_pairs(params: RandomFieldParams, grid: GridSpec, base_seed: int, split: int, count: int,
                  tol: float = defaults.CG_TOL, progress: bool = False):
    """(inputs, solutions), both count × h × w on the equation set."""
    inputs = np.zeros((count,) + grid.equation_shape)
    targets = np.zeros_like(inputs)
    for index in tqdm(range(count), desc="poisson pairs", disable=not progress):
        forcing = sample_forcing(params, grid, base_seed, split, index)
        inputs[index] = poisson_input(forcing, grid)
        targets[index] = to_equation(fdm.poisson_solve(forcing, grid, tol), grid)
    return inputs, targets


def initial_states(spec: ResidualSpec, params: RandomFieldParams, base_seed: int, split: int, count: int,
                   t0: float, tol: float = defaults.CG_TOL, cache: Optional[WarmStartCache] = None,
                   progress: bool = False) -> np.ndarray:
    """
    count × h × w stream-function states on the equation set.

    Lid-driven states are warm-started up to t0; periodic states are the stream function
    of the sampled vorticity.
    """
    grid = spec.grid
    if grid.boundary != Boundary.LID_DRIVEN:
        t0 = 0.0
    if count == 0:
        return np.zeros((0,) + grid.equation_shape)
    if cache is not None:
        states = cache.get_states(params, grid, spec.ns, base_seed, split, count, t0, tol, progress)
    else:
        states = compute_warm_states(params, grid, spec.ns, base_seed, split, count, t0, tol, progress)
    return to_equation(states, grid)


def trajectories(states: np.ndarray, spec: ResidualSpec, steps: int, tol: float = defaults.CG_TOL,
                 progress: bool = False) -> np.ndarray:
    """count × (steps+1) × h × w FDM trajectories from equation-set states."""
    grid = spec.grid
    out = np.zeros((states.shape[0], steps + 1) + states.shape[1:])
    for index in tqdm(range(states.shape[0]), desc="trajectories", disable=not progress):
        psi = to_full(states[index], grid)
        out[index, 0] = states[index]
        for step in range(1, steps + 1):
            psi = fdm.stream_step(psi, grid, spec.ns, tol)
            out[index, step] = to_equation(psi, grid)
    return out


def transition_pairs(paths: np.ndarray):
    """Consecutive (ψ_k, ψ_{k+1}) pairs of every trajectory, flattened over samples and steps."""
    inputs = paths[:, :-1].reshape((-1,) + paths.shape[2:])
    targets = paths[:, 1:].reshape((-1,) + paths.shape[2:])
    return inputs, targets


@dataclass
class EvalSet:
    """
    Held-out inputs with their reference outputs.

    `truths[i]` is the one-step reference for the one-step protocol, or the whole
    reference trajectory [ψ⁰ … ψ^h] for rollouts.
    """
    spec: ResidualSpec
    sample_ids: List[int]
    inputs: np.ndarray
    truths: np.ndarray

    @property
    def gauge_free(self) -> bool:
        return self.spec.grid.is_periodic

    def __len__(self) -> int:
        return len(self.sample_ids)


def build_test_set(spec: ResidualSpec, params: RandomFieldParams, base_seed: int, count: int,
                   protocol: EvalProtocol, t0: float = defaults.WARM_START_TEST, tol: float = defaults.CG_TOL,
                   cache: Optional[WarmStartCache] = None, progress: bool = False) -> EvalSet:
    ids = list(range(count))
    if spec.kind.is_poisson:
        inputs, truths = poisson_pairs(params, spec.grid, base_seed, TEST_SPLIT, count, tol, progress)
        return EvalSet(spec, ids, inputs, truths)

    states = initial_states(spec, params, base_seed, TEST_SPLIT, count, t0, tol, cache, progress)
    horizon = 1 if protocol.kind == EvalProtocolKind.ONE_STEP else protocol.horizon
    paths = trajectories(states, spec, horizon, tol, progress)
    truths = paths[:, 1] if protocol.kind == EvalProtocolKind.ONE_STEP else paths
    return EvalSet(spec, ids, states, truths)
