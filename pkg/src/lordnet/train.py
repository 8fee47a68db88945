"""
Adam, the learning-rate schedule and the MSE / MSR training loops.
"""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from . import datasets, msr
from .checkpoints import save_checkpoint
from .config import defaults
from .csv_writer import LOSS_CURVE_COLUMNS, LossRecord, TableWriter
from .dataclasses import DatasetSource, LossKind, TrainConfig
from .errors import DivergenceError, NumericalError, ShapeError
from .models import Model
from .randfield import derive_seed
from .tensor_core.field import Field, as_field
from .tensor_core.tape import Tape
from .warm_start import WarmStartCache

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    beta1: float = defaults.ADAM_BETA1
    beta2: float = defaults.ADAM_BETA2
    eps: float = defaults.ADAM_EPS

    @classmethod
    def zeros(cls, params: Dict[str, np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            **kwargs,
        )


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState,
              lr: float) -> Tuple[Dict[str, Field], AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient for parameter '{name}' at Adam step {state.t + 1}")

    t = state.t + 1
    m, v, updated = {}, {}, {}
    for name, value in params.items():
        grad = grads[name]
        if np.shape(grad) != np.shape(value):
            raise ShapeError(f"gradient of '{name}' does not match the parameter", np.shape(grad), np.shape(value))
        m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * grad * grad
        m_hat = m[name] / (1.0 - state.beta1 ** t)
        v_hat = v[name] / (1.0 - state.beta2 ** t)
        updated[name] = as_field(value - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated, replace(state, m=m, v=v, t=t)


def learning_rate(cfg: TrainConfig, iteration: int) -> float:
    """lr0 · factor^k after k completed decay intervals."""
    return cfg.lr0 * cfg.decay_factor ** (iteration // cfg.decay_interval())


@dataclass
class DataPool:
    """Ring of equation-set states with the number of pool steps since each was (re)initialized."""
    states: np.ndarray
    ages: np.ndarray
    refresh_period: int
    refresh_fraction: float
    reinit_period: int
    cursor: int = 0

    @property
    def size(self) -> int:
        return self.states.shape[0]


def pool_step(pool: DataPool, model, fresh: Callable[[int], np.ndarray]) -> DataPool:
    """
    Age every entry, replace the next refresh_fraction of the ring by the model's one-step
    predictions of those entries, then reset entries that reached reinit_period to fresh
    states drawn from `fresh(count)`. A zero refresh_fraction freezes the pool.
    """
    if pool.refresh_fraction == 0.0:
        return pool
    states = np.array(pool.states, copy=True)
    ages = pool.ages + 1
    count = int(round(pool.refresh_fraction * pool.size))
    cursor = pool.cursor
    if count:
        chosen = (cursor + np.arange(count)) % pool.size
        states[chosen] = model.predict(states[chosen][:, None])[:, 0]
        cursor = int((cursor + count) % pool.size)

    expired = np.flatnonzero(ages >= pool.reinit_period)
    if expired.size:
        states[expired] = fresh(expired.size)
        ages[expired] = 0
    return replace(pool, states=states, ages=ages, cursor=cursor)


class StateSupply:
    """Deterministic cycling draw from a fixed set of initial states."""

    def __init__(self, states: np.ndarray, seed: int):
        self.states = states
        self.rng = np.random.default_rng(seed)

    def __call__(self, count: int) -> np.ndarray:
        return self.states[self.rng.integers(0, self.states.shape[0], size=count)]


@dataclass
class TrainResult:
    model: Model
    loss_curve: List[LossRecord] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)


class BatchSource:
    """
    Produces (network inputs, loss data) per iteration.

    For MSR the loss data is the residual's data (forcing or ψ_t); for MSE it is the
    solved target. The MSR sources never call a solver for targets.
    """

    def __init__(self, cfg: TrainConfig, cache: Optional[WarmStartCache] = None, progress: bool = False):
        self.cfg = cfg
        self.spec = cfg.problem
        self.rng = np.random.default_rng(derive_seed(cfg.seed, datasets.BATCH_STREAM))
        self.pool: Optional[DataPool] = None
        self.supply: Optional[StateSupply] = None
        self.inputs = self.targets = None

        if cfg.loss == LossKind.MSE:
            if self.spec.kind.is_poisson:
                self.inputs, self.targets = datasets.poisson_pairs(
                    cfg.forcing, self.spec.grid, cfg.seed, datasets.TRAIN_SPLIT, cfg.num_samples, cfg.cg_tol, progress)
            else:
                states = self._initial_states(cache, progress)
                paths = datasets.trajectories(states, self.spec, self.spec.ns.steps, cfg.cg_tol, progress)
                self.inputs, self.targets = datasets.transition_pairs(paths)
        elif not self.spec.kind.is_poisson:
            states = self._initial_states(cache, progress)
            self.supply = StateSupply(states, derive_seed(cfg.seed, datasets.POOL_STREAM))
            if cfg.dataset_source == DatasetSource.POOL:
                size = cfg.pool.size
                self.pool = DataPool(self.supply(size), np.zeros(size, dtype=np.int64), cfg.pool.refresh_period,
                                     cfg.pool.refresh_fraction, cfg.pool.reinit_period)

    def _initial_states(self, cache, progress) -> np.ndarray:
        return datasets.initial_states(self.spec, self.cfg.forcing, self.cfg.seed, datasets.TRAIN_SPLIT,
                                       self.cfg.num_samples, self.cfg.warm_start_time, self.cfg.cg_tol,
                                       cache, progress)

    def batch(self, iteration: int, model: Model) -> Tuple[np.ndarray, np.ndarray]:
        cfg = self.cfg
        if self.inputs is not None:
            if self.inputs.shape[0] == 0:
                raise ShapeError("the training dataset is empty", self.inputs.shape)
            pick = self.rng.integers(0, self.inputs.shape[0], size=cfg.batch)
            return self.inputs[pick][:, None], self.targets[pick][:, None]
        if self.spec.kind.is_poisson:
            forcing = datasets.poisson_inputs(cfg.forcing, self.spec.grid, cfg.seed, datasets.TRAIN_SPLIT,
                                              iteration * cfg.batch, cfg.batch)[:, None]
            return forcing, forcing
        if self.pool is not None:
            if iteration and iteration % self.pool.refresh_period == 0:
                self.pool = pool_step(self.pool, model, self.supply)
            pick = self.rng.integers(0, self.pool.size, size=cfg.batch)
            states = self.pool.states[pick][:, None]
        else:
            states = self.supply(cfg.batch)[:, None]
        return states, states


def batch_loss(model: Model, params: Dict[str, np.ndarray], inputs: np.ndarray, data: np.ndarray,
               cfg: TrainConfig):
    """Record the loss of one batch on a fresh tape; returns (loss value, gradients)."""
    tape = Tape()
    handles = {name: tape.variable(value, name) for name, value in params.items()}
    prediction = model.forward(handles, tape.constant(inputs))
    if cfg.loss == LossKind.MSR:
        loss = msr.msr_loss(msr.residual(prediction, data, cfg.problem))
    else:
        loss = msr.mse_loss(prediction, data)
    grads = tape.backward(loss)
    return float(loss.value), grads


def write_loss_curve(records: List[LossRecord], path: str) -> None:
    TableWriter(LOSS_CURVE_COLUMNS).write_file(records, path)


def train(model: Model, cfg: TrainConfig, output_dir: Optional[str] = None,
          cache: Optional[WarmStartCache] = None, progress: bool = False) -> TrainResult:
    """
    Run `cfg.max_iters` Adam iterations on the MSR or MSE objective.

    Args:
        model: Network whose parameters seed the run; it is not modified.
        cfg: Training configuration.
        output_dir: When given, checkpoints go to output_dir/checkpoints/ and the loss
            curve to output_dir/loss_curve.csv.
        cache: Warm-start cache for Navier-Stokes initial states.
        progress: Show a progress bar.

    Raises:
        DivergenceError: The loss became NaN or exceeded the divergence threshold. The
            parameters before the failing step are attached and, with an output_dir,
            written to checkpoints/last_good.
    """
    source = BatchSource(cfg, cache, progress)
    params = dict(model.params)
    state = AdamState.zeros(params)
    result = TrainResult(model=model)
    checkpoint_root = os.path.join(output_dir, "checkpoints") if output_dir else None

    for iteration in tqdm(range(cfg.max_iters), desc="train", disable=not progress):
        lr = learning_rate(cfg, iteration)
        inputs, data = source.batch(iteration, model.with_params(params))
        loss, grads = batch_loss(model, params, inputs, data, cfg)

        if not math.isfinite(loss) or loss > cfg.divergence_threshold:
            if checkpoint_root:
                save_checkpoint(model, os.path.join(checkpoint_root, "last_good"), iteration, params)
            raise DivergenceError(iteration, loss, params)

        if iteration % cfg.log_every == 0 or iteration == cfg.max_iters - 1:
            result.loss_curve.append(LossRecord(iteration, lr, loss))
            logger.info("iteration %d: loss %.6e (lr %.3e)", iteration, loss, lr)

        params, state = adam_step(params, grads, state, lr)

        if checkpoint_root and cfg.checkpoint_every and (iteration + 1) % cfg.checkpoint_every == 0:
            path = os.path.join(checkpoint_root, f"iter_{iteration + 1:07d}")
            save_checkpoint(model, path, iteration + 1, params)
            result.checkpoints.append(path)

    result.model = model.with_params(params)
    if output_dir:
        final = os.path.join(checkpoint_root, "final")
        save_checkpoint(result.model, final, cfg.max_iters)
        result.checkpoints.append(final)
        write_loss_curve(result.loss_curve, os.path.join(output_dir, "loss_curve.csv"))
    return result
