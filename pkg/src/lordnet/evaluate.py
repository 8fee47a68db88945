"""
Relative-error metrics, autoregressive rollouts and evaluation reports.
"""

import json
import logging
import os
import time
from typing import List, Optional

import numpy as np

from . import fdm
from .config import defaults
from .csv_writer import EVAL_COLUMNS, ErrorRecord, TableWriter
from .dataclasses import EvalProtocol, EvalProtocolKind, EvalReport, ResidualSpec
from .datasets import EvalSet, to_equation, to_full
from .errors import ContractError, DegenerateTruthError, NonFiniteStateError, ShapeError
from .tensor_core.field import Field, as_field, is_finite

logger = logging.getLogger(__name__)


def relative_error(pred, truth, gauge_free: bool = False) -> float:
    """‖pred − truth‖₂ / ‖truth‖₂, after removing the means when the problem has no gauge."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError("prediction and truth shapes differ", pred.shape, truth.shape)
    if gauge_free:
        pred = pred - pred.mean()
        truth = truth - truth.mean()
    norm = float(np.linalg.norm(truth))
    if norm == 0.0:
        raise DegenerateTruthError("relative error is undefined for a zero-norm truth")
    return float(np.linalg.norm(pred - truth)) / norm


class FdmReference:
    """
    The finite-difference solver behind the model interface.

    Poisson: forcing → solution. Navier-Stokes: ψ_t → ψ_{t+1} through the same stream
    step that generates reference trajectories. Inputs and outputs live on the equation set.
    """

    kind = "fdm"

    def __init__(self, spec: ResidualSpec, tol: float = defaults.CG_TOL):
        self.spec = spec
        self.tol = tol

    def _solve_one(self, field: np.ndarray) -> np.ndarray:
        grid = self.spec.grid
        full = to_full(field, grid)
        if self.spec.kind.is_poisson:
            out = fdm.poisson_solve(full, grid, self.tol)
        else:
            out = fdm.stream_step(full, grid, self.spec.ns, self.tol)
        return to_equation(out, grid)

    def predict(self, inputs) -> Field:
        array = np.asarray(inputs, dtype=np.float64)
        if array.ndim == 2:
            return as_field(self._solve_one(array))
        out = np.empty_like(array)
        for index in np.ndindex(array.shape[:-2]):
            out[index] = self._solve_one(array[index])
        return as_field(out)


def rollout(model, psi_0, steps: int) -> List[Field]:
    """[ψ⁰, model(ψ⁰), model(model(ψ⁰)), …] with `steps` predictions."""
    if steps < 0:
        raise ContractError(f"steps must be non-negative, got {steps}")
    states = [as_field(psi_0)]
    for step in range(1, steps + 1):
        state = model.predict(states[-1])
        if not is_finite(state):
            raise NonFiniteStateError(step)
        states.append(as_field(state))
    return states


def median_inference_ms(model, sample, repetitions: int = defaults.TIMING_REPETITIONS) -> float:
    """Median wall-clock milliseconds of one forward pass on a single sample."""
    timings = []
    for _ in range(max(1, repetitions)):
        start = time.perf_counter()
        model.predict(sample)
        timings.append((time.perf_counter() - start) * 1000.0)
    return float(np.median(timings))


def evaluate(model, test_set: EvalSet, protocol: EvalProtocol, timing_repetitions: int = 0) -> EvalReport:
    """
    Relative errors of `model` over the held-out set.

    One-step: error of a single prediction per sample. Rollout(h): error of the state
    after h predictions against the reference trajectory; the report also carries the
    per-step mean error curve. Timing runs only when timing_repetitions > 0.
    """
    gauge_free = test_set.gauge_free
    errors: List[float] = []
    curve: Optional[np.ndarray] = None

    if protocol.kind == EvalProtocolKind.ONE_STEP:
        for inputs, truth in zip(test_set.inputs, test_set.truths):
            errors.append(relative_error(model.predict(inputs), truth, gauge_free))
    else:
        curve = np.zeros(protocol.horizon)
        for inputs, path in zip(test_set.inputs, test_set.truths):
            states = rollout(model, inputs, protocol.horizon)
            step_errors = [relative_error(states[k], path[k], gauge_free) for k in range(1, protocol.horizon + 1)]
            curve += np.asarray(step_errors)
            errors.append(step_errors[-1] if step_errors else 0.0)
        if len(test_set):
            curve /= len(test_set)

    report = EvalReport(
        protocol=protocol,
        errors=errors,
        mean=float(np.mean(errors)) if errors else float("nan"),
        std=float(np.std(errors)) if errors else float("nan"),
        error_curve=[] if curve is None else [float(e) for e in curve],
    )
    if timing_repetitions > 0 and len(test_set):
        report.median_inference_ms = median_inference_ms(model, test_set.inputs[0], timing_repetitions)
    logger.info("evaluation (%s, horizon %d): mean %.6e, std %.6e",
                protocol.kind.value, protocol.horizon, report.mean, report.std)
    return report


def report_summary(report: EvalReport) -> dict:
    return {
        "protocol": report.protocol.kind.value,
        "horizon": report.horizon,
        "count": len(report.errors),
        "mean": report.mean,
        "std": report.std,
        "error_curve": report.error_curve,
    }


def write_report(report: EvalReport, directory: str, sample_ids: Optional[List[int]] = None) -> None:
    """eval.csv and eval.json are reproducible byte for byte; timing goes to timing.json."""
    os.makedirs(directory, exist_ok=True)
    ids = sample_ids if sample_ids is not None else list(range(len(report.errors)))
    TableWriter(EVAL_COLUMNS).write_file(
        [ErrorRecord(sample_id, error) for sample_id, error in zip(ids, report.errors)],
        os.path.join(directory, "eval.csv"),
    )
    with open(os.path.join(directory, "eval.json"), "w", encoding="utf-8") as f:
        json.dump(report_summary(report), f, indent=2, sort_keys=True)
        f.write("\n")
    if report.median_inference_ms is not None:
        with open(os.path.join(directory, "timing.json"), "w", encoding="utf-8") as f:
            json.dump({"median_inference_ms": report.median_inference_ms}, f, indent=2)
            f.write("\n")
