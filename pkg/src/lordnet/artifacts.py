"""
Dataset generation and FDM solving with on-disk manifests and residual audits.
"""

import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from . import fdm, msr
from .config.run_config import RunConfig, parse_run_config, run_config_to_dict
from .csv_writer import AUDIT_COLUMNS, AuditRecord, TableWriter
from .dataclasses import Boundary, LossKind, ResidualSpec
from .datasets import TEST_SPLIT, TRAIN_SPLIT, poisson_input, sample_forcing, to_equation, to_full
from .errors import ConfigError, NotConvergedError
from .field_io import read_field, write_field
from .randfield import derive_seed
from .warm_start import initial_vorticity

logger = logging.getLogger(__name__)

DATASET_MANIFEST = "manifest.json"
DATASET_FORMAT = "lordnet-dataset"
SPLITS = {"train": TRAIN_SPLIT, "test": TEST_SPLIT}


@dataclass(frozen=True)
class SampleTask:
    config: dict
    split: int
    index: int
    with_target: bool


def prepare_output_dir(directory: str, force: bool = False) -> None:
    """Create `directory`; an existing one is refused unless `force` clears it first."""
    if os.path.exists(directory):
        if not force:
            raise ConfigError("output directory exists; pass --force to overwrite", directory)
        shutil.rmtree(directory)
    os.makedirs(directory)


def _ns_initial_state(config: RunConfig, split: int, index: int) -> np.ndarray:
    spec = config.residual_spec()
    grid = spec.grid
    t0 = config.problem.warm_start_time if grid.boundary == Boundary.LID_DRIVEN else 0.0
    if split == TEST_SPLIT and grid.boundary == Boundary.LID_DRIVEN:
        t0 = config.problem.test_warm_start_time
    omega = initial_vorticity(config.problem.initial_vorticity, grid, config.seeds.base, split, index)
    return fdm.ns_advance(omega, grid, spec.ns, t0, config.train.cg_tol)


def generate_sample(task: SampleTask) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Network input (and solved target) of one sample, both on the equation set."""
    config = parse_run_config(task.config, environ={})
    spec = config.residual_spec()
    grid, tol = spec.grid, config.train.cg_tol
    if spec.kind.is_poisson:
        forcing = sample_forcing(config.problem.forcing, grid, config.seeds.base, task.split, task.index)
        target = to_equation(fdm.poisson_solve(forcing, grid, tol), grid) if task.with_target else None
        return poisson_input(forcing, grid), target
    psi = _ns_initial_state(config, task.split, task.index)
    target = to_equation(fdm.stream_step(psi, grid, spec.ns, tol), grid) if task.with_target else None
    return to_equation(psi, grid), target


def _map(function, items: Sequence, jobs: int, desc: str, progress: bool) -> List:
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(tqdm(pool.map(function, items), total=len(items), desc=desc, disable=not progress))
    return [function(item) for item in tqdm(items, desc=desc, disable=not progress)]


def generate_dataset(config: RunConfig, directory: str, count: int, split: str = "train",
                     jobs: int = 1, progress: bool = False) -> dict:
    """
    Write `count` samples as LDNF files plus manifest.json.

    MSE configurations also get FDM-solved targets. Files are named by sample index so
    that reruns with the same seeds reproduce every byte.
    """
    if count < 0:
        raise ConfigError(f"count must be non-negative, got {count}", "--count")
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}", "--split")
    with_target = config.train.loss == LossKind.MSE
    plain = run_config_to_dict(config)
    tasks = [SampleTask(plain, SPLITS[split], index, with_target) for index in range(count)]
    samples = _map(generate_sample, tasks, jobs, "gen", progress)

    entries = []
    for index, (inputs, target) in enumerate(samples):
        entry = {"index": index, "seed": derive_seed(config.seeds.base, SPLITS[split], index),
                 "input": f"samples/input_{index:05d}.ldnf"}
        write_field(os.path.join(directory, entry["input"]), inputs)
        if target is not None:
            entry["target"] = f"samples/target_{index:05d}.ldnf"
            write_field(os.path.join(directory, entry["target"]), target)
        entries.append(entry)

    manifest = {
        "format": DATASET_FORMAT,
        "version": 1,
        "config": plain,
        "split": split,
        "base_seed": config.seeds.base,
        "count": count,
        "targets": with_target,
        "samples": entries,
    }
    with open(os.path.join(directory, DATASET_MANIFEST), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("generated %d %s samples in %s", count, split, directory)
    return manifest


def load_inputs(path: str) -> List[np.ndarray]:
    """Equation-set inputs from a dataset directory or from one LDNF file (2D or stacked)."""
    manifest_path = os.path.join(path, DATASET_MANIFEST)
    if os.path.isdir(path):
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except FileNotFoundError:
            raise ConfigError("dataset manifest not found", manifest_path) from None
        if manifest.get("format") != DATASET_FORMAT:
            raise ConfigError("not a lordnet dataset", manifest_path)
        return [read_field(os.path.join(path, entry["input"])) for entry in manifest["samples"]]
    if not os.path.exists(path):
        raise ConfigError("input not found", path)
    field = read_field(path)
    if field.ndim == 2:
        return [field]
    return [field[index] for index in np.ndindex(field.shape[:-2])]


def _scaled_residual(residual: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.max(np.abs(residual))) / max(1.0, float(np.linalg.norm(rhs)))


def poisson_audit(solution, forcing, spec: ResidualSpec) -> float:
    """‖∇²_h u + f‖∞ / max(1, ‖f‖₂) on the equation set, f mean-projected when periodic."""
    rhs = msr.equation_view(forcing, spec.grid)
    if spec.grid.is_periodic:
        rhs = rhs - rhs.mean()
    return _scaled_residual(fdm.laplacian(solution, spec.grid) + rhs, rhs)


def step_audit(psi_t, psi_next, spec: ResidualSpec) -> float:
    """Scaled max-norm residual of one stream step against the explicit Euler target."""
    target = msr.euler_target(to_equation(psi_t, spec.grid), spec)
    return _scaled_residual(-fdm.laplacian(psi_next, spec.grid) - target, target)


@dataclass(frozen=True)
class SolveTask:
    config: dict
    sample_id: int
    inputs: np.ndarray


def solve_sample(task: SolveTask) -> Tuple[Optional[np.ndarray], AuditRecord]:
    """
    FDM solution of one equation-set input and its audit record.

    Poisson inputs are forcings; Navier-Stokes inputs are stream functions advanced
    `problem.steps` steps, the output being the stacked trajectory.
    """
    config = parse_run_config(task.config, environ={})
    spec = config.residual_spec()
    grid, tol = spec.grid, config.train.cg_tol
    full = to_full(task.inputs, grid)
    try:
        if spec.kind.is_poisson:
            solution = fdm.poisson_solve(full, grid, tol)
            worst = poisson_audit(solution, full, spec)
            output = to_equation(solution, grid)
        else:
            states, worst = [to_equation(full, grid)], 0.0
            psi = full
            for _ in range(spec.ns.steps):
                psi_next = fdm.stream_step(psi, grid, spec.ns, tol)
                worst = max(worst, step_audit(psi, psi_next, spec))
                states.append(to_equation(psi_next, grid))
                psi = psi_next
            output = np.stack(states)
    except NotConvergedError as exc:
        logger.warning("sample %d: %s", task.sample_id, exc)
        return None, AuditRecord(task.sample_id, exc.residual, exc.iterations, False, str(exc))
    return output, AuditRecord(task.sample_id, worst, None, True)


def solve_inputs(config: RunConfig, inputs: List[np.ndarray], directory: str, jobs: int = 1,
                 progress: bool = False) -> List[AuditRecord]:
    """Solve every input, write solutions/solution_<id>.ldnf and audit.csv; non-converged samples are skipped."""
    plain = run_config_to_dict(config)
    tasks = [SolveTask(plain, sample_id, np.asarray(field)) for sample_id, field in enumerate(inputs)]
    results = _map(solve_sample, tasks, jobs, "solve", progress)

    records = []
    for task, (output, record) in zip(tasks, results):
        if output is not None:
            write_field(os.path.join(directory, "solutions", f"solution_{task.sample_id:05d}.ldnf"), output)
        records.append(record)
    TableWriter(AUDIT_COLUMNS).write_file(records, os.path.join(directory, "audit.csv"))
    failed = sum(1 for record in records if not record.converged)
    logger.info("solved %d inputs (%d did not converge)", len(records), failed)
    return records


def audit_tolerance(config: RunConfig) -> float:
    return 10.0 * config.train.cg_tol

