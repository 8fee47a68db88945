"""
Seed-pinned experiment presets: desk-scale (ci) runs with gating tolerances and
full-scale (extended) profiles that record the published numbers.
"""

import copy
import dataclasses
import json
import logging
import operator
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import fdm, msr
from .config import defaults
from .config.run_config import ModelKind, RunConfig, parse_run_config, run_config_to_dict
from .dataclasses import (
    Boundary,
    EvalProtocol,
    EvalProtocolKind,
    EvalReport,
    GridSpec,
    NsParams,
    ResidualKind,
    ResidualSpec,
)
from .datasets import EvalSet, build_test_set
from .errors import AcceptanceError, ConfigError
from .evaluate import FdmReference, evaluate, write_report
from .models import build_model
from .render import write_pgm
from .tensor_core.tape import Tape
from .train import TrainResult, train
from .warm_start import WarmStartCache

logger = logging.getLogger(__name__)


class PresetScale(Enum):
    CI = "ci"
    EXTENDED = "extended"


class Study(Enum):
    POISSON = "poisson"
    CNN_VS_LORD = "cnn_vs_lord"
    NAVIER_STOKES = "navier_stokes"
    ENTANGLEMENT = "entanglement"


class Comparison(Enum):
    AT_MOST = "<="
    BELOW = "<"
    AT_LEAST = ">="
    ABOVE = ">"

    def holds(self, value: float, bound: float) -> bool:
        compare = {
            Comparison.AT_MOST: operator.le,
            Comparison.BELOW: operator.lt,
            Comparison.AT_LEAST: operator.ge,
            Comparison.ABOVE: operator.gt,
        }[self]
        return bool(np.isfinite(value)) and compare(value, bound)


@dataclass(frozen=True)
class MetricExpectation:
    metric: str
    comparison: Comparison
    bound: float
    reported_value: Optional[float] = None

    def check(self, metrics: Dict[str, float]) -> Optional[str]:
        """None when the expectation holds, otherwise a one-line diff."""
        value = metrics.get(self.metric)
        if value is not None and self.comparison.holds(value, self.bound):
            return None
        shown = "missing" if value is None else f"{value:.6e}"
        reported = "" if self.reported_value is None else f" (reported {self.reported_value:g})"
        return f"{self.metric} = {shown}, expected {self.comparison.value} {self.bound:g}{reported}"


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    study: Study
    scale: PresetScale
    config: dict
    expectations: Tuple[MetricExpectation, ...]
    description: str = ""

    def run_config(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> RunConfig:
        data = copy.deepcopy(self.config)
        if output_dir is not None:
            data["output_dir"] = output_dir
        return parse_run_config(data, seed=seed, environ={})


@dataclass
class PresetResult:
    name: str
    scale: PresetScale
    directory: str
    metrics: Dict[str, float]
    failures: List[str] = field(default_factory=list)
    report: Optional[EvalReport] = None

    @property
    def passed(self) -> bool:
        return not self.failures


def entanglement_points(m: int) -> List[Tuple[int, int]]:
    """Four query points on an m×m equation grid."""
    a, b = m // 4, m // 2
    return [(a, a), (a, b), (b, a), (b, b)]


def inverse_rows(grid: GridSpec, points: Sequence[Tuple[int, int]]) -> List[np.ndarray]:
    return [np.asarray(fdm.inverse_operator_row(point, grid)) for point in points]


def shift_mismatches(rows: Sequence[np.ndarray], points: Sequence[Tuple[int, int]]) -> List[Tuple[float, float]]:
    """
    (max abs deviation, relative 2-norm mismatch) between each row and the first row
    circularly shifted onto the same query point.
    """
    out = []
    for row, point in zip(rows[1:], points[1:]):
        shift = (point[0] - points[0][0], point[1] - points[0][1])
        moved = np.roll(rows[0], shift, axis=(0, 1))
        out.append((float(np.max(np.abs(row - moved))), float(np.linalg.norm(row - moved) / np.linalg.norm(row))))
    return out


def single_mode_decay(n: int, ns: NsParams, mode: Tuple[int, int] = (1, 2),
                      tol: float = defaults.CG_TOL) -> Dict[str, float]:
    """
    One periodic step of a single discrete Fourier mode against its closed-form decay.

    The advective term of an eigenmode vanishes, so ψ¹ = (1 − dt·μ/Re)·ψ⁰ with μ the
    eigenvalue of −∇²_h. Returns the relative deviations of the FDM step and of the
    residual at the closed-form state.
    """
    grid = GridSpec(n, Boundary.PERIODIC)
    k, l = mode
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    psi_0 = np.sin(2.0 * np.pi * k * i / n) * np.cos(2.0 * np.pi * l * j / n)
    mu = 4.0 / grid.delta ** 2 * (np.sin(np.pi * k / n) ** 2 + np.sin(np.pi * l / n) ** 2)
    factor = 1.0 - ns.dt * mu / ns.reynolds

    psi_1 = fdm.stream_step(psi_0, grid, ns, tol)
    fdm_deviation = float(np.max(np.abs(psi_1 - factor * psi_0)) / np.max(np.abs(psi_0)))

    spec = ResidualSpec(kind=ResidualKind.NS_PERIODIC, grid=grid, ns=ns)
    tape = Tape()
    residual = msr.ns_residual(psi_0[None, None], tape.constant((factor * psi_0)[None, None]), spec)
    residual_deviation = float(np.max(np.abs(residual.value)) / (mu * np.max(np.abs(psi_0))))
    return {"decay_factor": factor, "decay_fdm_deviation": fdm_deviation,
            "decay_residual_deviation": residual_deviation}


class PresetRunner:
    """Runs the studies behind the presets and archives every artifact under one directory."""

    def __init__(self, directory: str, cache: Optional[WarmStartCache] = None, progress: bool = False):
        self.directory = directory
        self.cache = cache
        self.progress = progress

    def run(self, preset: ExperimentPreset, config: RunConfig) -> Tuple[Dict[str, float], Optional[EvalReport]]:
        studies = {
            Study.POISSON: self.poisson,
            Study.CNN_VS_LORD: self.cnn_vs_lord,
            Study.NAVIER_STOKES: self.navier_stokes,
            Study.ENTANGLEMENT: self.entanglement,
        }
        return studies[preset.study](config)

    def _train(self, config: RunConfig, directory: str) -> TrainResult:
        model = build_model(config.network_config())
        return train(model, config.train_config(), directory, self.cache, self.progress)

    def _test_set(self, config: RunConfig, protocol: EvalProtocol) -> EvalSet:
        return build_test_set(
            config.residual_spec(), config.input_field_params(), config.seeds.base, config.eval.num_samples,
            protocol, config.problem.test_warm_start_time, config.train.cg_tol, self.cache, self.progress,
        )

    def _evaluate(self, model, test_set: EvalSet, protocol: EvalProtocol, config: RunConfig,
                  directory: str) -> EvalReport:
        report = evaluate(model, test_set, protocol, config.eval.timing_repetitions)
        write_report(report, directory, test_set.sample_ids)
        return report

    def poisson(self, config: RunConfig) -> Tuple[Dict[str, float], EvalReport]:
        result = self._train(config, self.directory)
        protocol = config.eval_protocol()
        report = self._evaluate(result.model, self._test_set(config, protocol), protocol, config,
                                os.path.join(self.directory, "eval"))
        return {"mean_relative_error": report.mean, "std_relative_error": report.std}, report

    def cnn_vs_lord(self, config: RunConfig) -> Tuple[Dict[str, float], EvalReport]:
        """Train LordNet and the dilated CNN on the same budget and data; compare their errors."""
        protocol = config.eval_protocol()
        test_set = self._test_set(config, protocol)
        cnn_config = dataclasses.replace(
            config, network=dataclasses.replace(config.network, kind=ModelKind.DILATED_CNN, dilations=()))

        reports = {}
        for label, run in (("lord", config), ("cnn", cnn_config)):
            directory = os.path.join(self.directory, label)
            result = self._train(run, directory)
            reports[label] = self._evaluate(result.model, test_set, protocol, run, os.path.join(directory, "eval"))
        metrics = {
            "lord_error": reports["lord"].mean,
            "cnn_error": reports["cnn"].mean,
            "error_ratio": reports["lord"].mean / reports["cnn"].mean,
        }
        return metrics, reports["lord"]

    def navier_stokes(self, config: RunConfig) -> Tuple[Dict[str, float], EvalReport]:
        """
        MSR loss drop, one-step and rollout errors, the FDM metric floor and, on periodic
        grids, the single-mode decay check.
        """
        spec = config.residual_spec()
        metrics: Dict[str, float] = {}
        if spec.grid.is_periodic:
            metrics.update(single_mode_decay(spec.grid.n, spec.ns, tol=config.train.cg_tol))

        result = self._train(config, self.directory)
        curve = result.loss_curve
        metrics["loss_drop"] = curve[0].loss / curve[-1].loss if curve and curve[-1].loss > 0 else float("inf")

        protocol = EvalProtocol(EvalProtocolKind.ROLLOUT, config.eval.horizon)
        rollout_set = self._test_set(config, protocol)
        one_step = EvalProtocol(EvalProtocolKind.ONE_STEP)
        one_step_set = EvalSet(spec, rollout_set.sample_ids, rollout_set.inputs, rollout_set.truths[:, 1])

        error_1 = self._evaluate(result.model, one_step_set, one_step, config,
                                 os.path.join(self.directory, "eval_one_step"))
        report = self._evaluate(result.model, rollout_set, protocol, config,
                                os.path.join(self.directory, "eval_rollout"))
        floor = evaluate(FdmReference(spec, config.train.cg_tol), rollout_set, protocol)

        metrics["error_1"] = error_1.mean
        metrics[f"error_{protocol.horizon}"] = report.mean
        metrics["fdm_floor"] = max(floor.error_curve + floor.errors, default=0.0)
        return metrics, report

    def entanglement(self, config: RunConfig) -> Tuple[Dict[str, float], None]:
        """Inverse-operator rows at four query points for Dirichlet and periodic grids, rendered as heatmaps."""
        n = config.grid.n
        metrics: Dict[str, float] = {}
        for boundary in (Boundary.DIRICHLET_ZERO, Boundary.PERIODIC):
            grid = GridSpec(n, boundary)
            points = entanglement_points(grid.equation_shape[0])
            rows = inverse_rows(grid, points)
            for k, (row, point) in enumerate(zip(rows, points)):
                write_pgm(os.path.join(self.directory, "rows", f"{boundary.value}_row{k}_{point[0]}_{point[1]}.pgm"),
                          row)
            mismatches = shift_mismatches(rows, points)
            if boundary == Boundary.PERIODIC:
                metrics["periodic_shift_deviation"] = max(absolute for absolute, _ in mismatches)
            else:
                metrics["dirichlet_shift_mismatch"] = max(relative for _, relative in mismatches)
        return metrics, None


def _poisson_config(kind: str, n: int, train: dict, network: Optional[dict] = None, eval_samples: int = 100) -> dict:
    return {
        "problem": {"kind": kind},
        "grid": {"n": n},
        "network": network or {"kind": "poisson_linear", "channels": 16, "layers": 2, "rank": 1},
        "train": dict({"loss": "msr", "log_every": 100}, **train),
        "eval": {"protocol": "one_step", "num_samples": eval_samples},
        "seeds": {"base": 0, "network": 0},
    }


def _ns_config(kind: str, n: int, train: dict, network: dict, horizon: int, eval_samples: int) -> dict:
    return {
        "problem": {"kind": kind, "reynolds": defaults.REYNOLDS, "dt": defaults.DT},
        "grid": {"n": n},
        "network": dict({"kind": "ns_lord", "layers": 2, "rank": 1}, **network),
        "train": dict({"loss": "msr", "log_every": 50}, **train),
        "eval": {"protocol": "rollout", "horizon": horizon, "num_samples": eval_samples},
        "seeds": {"base": 0, "network": 0},
    }


_POISSON_CI_TRAIN = {"lr0": 1e-3, "decay_factor": 0.8, "decay_every": 1000, "batch": 32, "max_iters": 6000}
_POISSON_FULL_TRAIN = {"lr0": 1e-3, "decay_factor": 0.8, "decay_every": 10_000, "batch": 256, "max_iters": 150_000}
_NS_CI_NETWORK = {"channels": 16, "hidden": [64, 32]}
_NS_FULL_NETWORK = {"channels": 64, "hidden": [256, 128]}
_NS_CI_TRAIN = {"lr0": 1e-3, "decay_factor": 0.9, "decay_every": 1000, "batch": 16, "max_iters": 3000,
                "num_samples": 64}

PRESETS: Dict[str, ExperimentPreset] = {preset.name: preset for preset in (
    ExperimentPreset(
        "poisson_periodic_n32_ci", Study.POISSON, PresetScale.CI,
        _poisson_config("poisson_periodic", 32, _POISSON_CI_TRAIN),
        (MetricExpectation("mean_relative_error", Comparison.AT_MOST, 5e-3, 0.00051),),
        "Linear LordNet on the periodic Poisson problem, MSR loss.",
    ),
    ExperimentPreset(
        "poisson_dirichlet_n32_ci", Study.POISSON, PresetScale.CI,
        _poisson_config("poisson_dirichlet", 32, _POISSON_CI_TRAIN),
        (MetricExpectation("mean_relative_error", Comparison.AT_MOST, 2e-2, 0.00265),),
        "Linear LordNet on the zero-Dirichlet Poisson problem, MSR loss.",
    ),
    ExperimentPreset(
        "poisson_dirichlet_cnn_vs_lord_ci", Study.CNN_VS_LORD, PresetScale.CI,
        _poisson_config("poisson_dirichlet", 32, _POISSON_CI_TRAIN),
        (MetricExpectation("lord_error", Comparison.AT_MOST, 2e-2, 0.00265),
         MetricExpectation("error_ratio", Comparison.AT_MOST, 0.1, 0.00265 / 0.73042)),
        "LordNet against the dilated CNN at a matched training budget.",
    ),
    ExperimentPreset(
        "ns_liddriven_n32_ci", Study.NAVIER_STOKES, PresetScale.CI,
        _ns_config("ns_liddriven", 32, _NS_CI_TRAIN, _NS_CI_NETWORK, horizon=100, eval_samples=10),
        (MetricExpectation("loss_drop", Comparison.AT_LEAST, 100.0),
         MetricExpectation("error_1", Comparison.AT_MOST, 1e-2, 0.000071),
         MetricExpectation("error_100", Comparison.AT_MOST, 0.2),
         MetricExpectation("fdm_floor", Comparison.AT_MOST, 10 * defaults.CG_TOL)),
        "Lid-driven cavity Lord network, MSR loss on warm-started initial states.",
    ),
    ExperimentPreset(
        "ns_periodic_n32_ci", Study.NAVIER_STOKES, PresetScale.CI,
        _ns_config("ns_periodic", 32, _NS_CI_TRAIN, _NS_CI_NETWORK, horizon=20, eval_samples=10),
        (MetricExpectation("decay_fdm_deviation", Comparison.BELOW, 1e-8),
         MetricExpectation("decay_residual_deviation", Comparison.BELOW, 1e-8),
         MetricExpectation("error_20", Comparison.AT_MOST, 0.1)),
        "Periodic Navier-Stokes Lord network with the single-mode decay check.",
    ),
    ExperimentPreset(
        "entanglement_ci", Study.ENTANGLEMENT, PresetScale.CI,
        _poisson_config("poisson_dirichlet", 32, {}),
        (MetricExpectation("periodic_shift_deviation", Comparison.BELOW, 1e-10),
         MetricExpectation("dirichlet_shift_mismatch", Comparison.ABOVE, 0.1)),
        "Rows of the inverse Poisson operator: shift-invariant when periodic, not with walls.",
    ),
    ExperimentPreset(
        "poisson_periodic_n32_full", Study.POISSON, PresetScale.EXTENDED,
        _poisson_config("poisson_periodic", 32, _POISSON_FULL_TRAIN),
        (MetricExpectation("mean_relative_error", Comparison.AT_MOST, 0.00051 + 3 * 0.00006, 0.00051),),
    ),
    ExperimentPreset(
        "poisson_dirichlet_n32_full", Study.CNN_VS_LORD, PresetScale.EXTENDED,
        _poisson_config("poisson_dirichlet", 32, _POISSON_FULL_TRAIN),
        (MetricExpectation("lord_error", Comparison.AT_MOST, 0.00265 + 3 * 0.00015, 0.00265),
         MetricExpectation("cnn_error", Comparison.AT_LEAST, 0.73042 - 3 * 0.00707, 0.73042)),
    ),
    ExperimentPreset(
        "poisson_periodic_n128_full", Study.POISSON, PresetScale.EXTENDED,
        _poisson_config("poisson_periodic", 128, _POISSON_FULL_TRAIN,
                        {"kind": "poisson_linear", "channels": 64, "layers": 4, "interleave_mixers": True}),
        (MetricExpectation("mean_relative_error", Comparison.AT_MOST, 0.00379 + 3 * 0.00031, 0.00379),),
    ),
    ExperimentPreset(
        "poisson_dirichlet_n128_full", Study.POISSON, PresetScale.EXTENDED,
        _poisson_config("poisson_dirichlet", 128, _POISSON_FULL_TRAIN,
                        {"kind": "poisson_linear", "channels": 64, "layers": 4, "interleave_mixers": True}),
        (MetricExpectation("mean_relative_error", Comparison.AT_MOST, 0.06937 + 3 * 0.00914, 0.06937),),
    ),
    ExperimentPreset(
        "ns_liddriven_n64_full", Study.NAVIER_STOKES, PresetScale.EXTENDED,
        _ns_config("ns_liddriven", 64,
                   {"lr0": 1e-3, "decay_factor": 0.9, "decay_every": 100, "decay_unit": "epochs", "batch": 64,
                    "num_samples": 5000, "max_iters": 5000 * 79},
                   _NS_FULL_NETWORK, horizon=defaults.EVAL_STEPS_LIDDRIVEN, eval_samples=25),
        (MetricExpectation("error_1", Comparison.AT_MOST, 0.000071 + 3 * 0.000009, 0.000071),
         MetricExpectation("error_2700", Comparison.AT_MOST, 0.0284 + 3 * 0.0036, 0.0284)),
    ),
    ExperimentPreset(
        "ns_periodic_n64_full", Study.NAVIER_STOKES, PresetScale.EXTENDED,
        _ns_config("ns_periodic", 64,
                   {"lr0": 1e-3, "decay_factor": 0.9, "decay_every": 50_000, "batch": 64, "num_samples": 5000,
                    "max_iters": 500_000},
                   _NS_FULL_NETWORK, horizon=defaults.EVAL_STEPS_PERIODIC, eval_samples=25),
        (MetricExpectation("error_1", Comparison.AT_MOST, 0.0000092 + 3 * 0.0000006, 0.0000092),
         MetricExpectation("error_200", Comparison.AT_MOST, 0.00247 + 3 * 0.00015, 0.00247)),
    ),
)}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(sorted(PRESETS))})", "preset") from None


def preset_names(scale: Optional[PresetScale] = None) -> List[str]:
    return sorted(name for name, preset in PRESETS.items() if scale is None or preset.scale == scale)


def _write_json(path: str, data) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def run_preset(name: str, output_dir: str = defaults.DEFAULT_OUTPUT_DIR, seed: Optional[int] = None,
               cache_dir: Optional[str] = None, progress: bool = False) -> PresetResult:
    """
    Run a preset end to end and archive it under output_dir/presets/<name>/.

    Args:
        name: Preset name.
        output_dir: Root of the archive.
        seed: Overrides the preset's base seed.
        cache_dir: Warm-start cache; defaults to output_dir/warm_start.
        progress: Show progress bars.

    Raises:
        AcceptanceError: A ci preset missed one of its expectations. Extended presets
            only log their misses.
    """
    preset = get_preset(name)
    directory = os.path.join(output_dir, "presets", name)
    os.makedirs(directory, exist_ok=True)
    config = preset.run_config(seed, directory)
    _write_json(os.path.join(directory, "config.json"), run_config_to_dict(config))

    cache = WarmStartCache(cache_dir or os.path.join(output_dir, "warm_start"))
    metrics, report = PresetRunner(directory, cache, progress).run(preset, config)

    failures = [diff for diff in (e.check(metrics) for e in preset.expectations) if diff is not None]
    _write_json(os.path.join(directory, "metrics.json"), {
        "preset": name,
        "scale": preset.scale.value,
        "metrics": metrics,
        "expectations": [
            {"metric": e.metric, "comparison": e.comparison.value, "bound": e.bound,
             "reported_value": e.reported_value, "passed": e.check(metrics) is None}
            for e in preset.expectations
        ],
    })
    result = PresetResult(name, preset.scale, directory, metrics, failures, report)

    if failures:
        if preset.scale == PresetScale.CI:
            raise AcceptanceError(f"preset {name} missed {len(failures)} expectation(s): " + "; ".join(failures),
                                  failures)
        for diff in failures:
            logger.warning("preset %s: %s", name, diff)
    logger.info("preset %s finished: %s", name, ", ".join(f"{k}={v:.3e}" for k, v in sorted(metrics.items())))
    return result
