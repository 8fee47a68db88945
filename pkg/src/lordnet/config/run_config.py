"""
Run configuration: a JSON document validated into frozen dataclasses before any compute.
"""

import dataclasses
import logging
import os
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple, get_args, get_origin, get_type_hints

import yaml

from . import defaults
from ..dataclasses import (
    NS_INITIAL_VORTICITY,
    POISSON_FORCING,
    Boundary,
    ConvBoundary,
    DatasetSource,
    DecayUnit,
    DilatedCnnConfig,
    EvalProtocol,
    EvalProtocolKind,
    GridSpec,
    LossKind,
    ModuleOrdering,
    NetworkConfig,
    NetworkVariant,
    NsParams,
    PoolConfig,
    RandomFieldParams,
    ResidualKind,
    ResidualSpec,
    TrainConfig,
)
from ..errors import ConfigError

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    POISSON_LINEAR = "poisson_linear"
    NS_LORD = "ns_lord"
    DILATED_CNN = "dilated_cnn"


@dataclasses.dataclass(frozen=True)
class ProblemSection:
    kind: ResidualKind
    reynolds: float = defaults.REYNOLDS
    dt: float = defaults.DT
    steps: int = 1
    lid_speed: float = defaults.LID_SPEED
    forcing: RandomFieldParams = POISSON_FORCING
    initial_vorticity: RandomFieldParams = NS_INITIAL_VORTICITY
    warm_start_time: float = defaults.WARM_START_TRAIN
    test_warm_start_time: float = defaults.WARM_START_TEST


@dataclasses.dataclass(frozen=True)
class GridSection:
    n: int = 32


@dataclasses.dataclass(frozen=True)
class NetworkSection:
    kind: ModelKind = ModelKind.POISSON_LINEAR
    channels: int = 16
    layers: int = 2
    rank: int = 1
    hidden: Tuple[int, int] = (256, 128)
    ordering: ModuleOrdering = ModuleOrdering.EMBED_MIX_LORD
    interleave_mixers: bool = False
    dilations: Tuple[int, ...] = ()


@dataclasses.dataclass(frozen=True)
class TrainSection:
    loss: LossKind = LossKind.MSR
    lr0: float = 1e-3
    decay_factor: float = 0.8
    decay_every: int = 10_000
    decay_unit: DecayUnit = DecayUnit.ITERATIONS
    batch: int = 16
    max_iters: int = 1000
    dataset_source: DatasetSource = DatasetSource.SAMPLED_INITIALS
    num_samples: int = 256
    log_every: int = 100
    checkpoint_every: int = 0
    divergence_threshold: float = defaults.DIVERGENCE_THRESHOLD
    cg_tol: float = defaults.CG_TOL
    pool: PoolConfig = PoolConfig()


@dataclasses.dataclass(frozen=True)
class EvalSection:
    protocol: EvalProtocolKind = EvalProtocolKind.ONE_STEP
    horizon: int = 1
    num_samples: int = 100
    timing_repetitions: int = defaults.TIMING_REPETITIONS


@dataclasses.dataclass(frozen=True)
class SeedSection:
    base: int = 0
    network: int = 0


@dataclasses.dataclass(frozen=True)
class RunConfig:
    problem: ProblemSection
    grid: GridSection = GridSection()
    network: NetworkSection = NetworkSection()
    train: TrainSection = TrainSection()
    eval: EvalSection = EvalSection()
    seeds: SeedSection = SeedSection()
    output_dir: str = defaults.DEFAULT_OUTPUT_DIR

    def __post_init__(self):
        # Build the derived objects once so invalid combinations fail at load time.
        self.train_config()
        self.network_config()
        self.eval_protocol()

    def grid_spec(self) -> GridSpec:
        boundary = self.problem.kind.boundary
        lid = self.problem.lid_speed if boundary == Boundary.LID_DRIVEN else 0.0
        return GridSpec(n=self.grid.n, boundary=boundary, lid_speed=lid)

    def ns_params(self, steps: Optional[int] = None) -> Optional[NsParams]:
        if self.problem.kind.is_poisson:
            return None
        return NsParams(self.problem.reynolds, self.problem.dt, self.problem.steps if steps is None else steps)

    def residual_spec(self) -> ResidualSpec:
        return ResidualSpec(kind=self.problem.kind, grid=self.grid_spec(), ns=self.ns_params())

    def input_field_params(self) -> RandomFieldParams:
        """Random-field parameters of the sampled inputs: forcing or initial vorticity."""
        return self.problem.forcing if self.problem.kind.is_poisson else self.problem.initial_vorticity

    def network_config(self):
        section = self.network
        shape = self.residual_spec().field_shape
        if section.kind == ModelKind.DILATED_CNN:
            mode = ConvBoundary.PERIODIC_WRAP if self.grid_spec().is_periodic else ConvBoundary.ZERO_PAD
            return DilatedCnnConfig(spatial_shape=shape, channels=section.channels, dilations=section.dilations,
                                    boundary_mode=mode, seed=self.seeds.network)
        return NetworkConfig(
            variant=NetworkVariant(section.kind.value),
            spatial_shape=shape,
            channels=section.channels,
            layers=section.layers,
            rank=section.rank,
            hidden=section.hidden,
            ordering=section.ordering,
            interleave_mixers=section.interleave_mixers,
            seed=self.seeds.network,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            loss=t.loss, lr0=t.lr0, decay_factor=t.decay_factor, decay_every=t.decay_every,
            batch=t.batch, max_iters=t.max_iters, seed=self.seeds.base, problem=self.residual_spec(),
            dataset_source=t.dataset_source, decay_unit=t.decay_unit, num_samples=t.num_samples,
            log_every=t.log_every, checkpoint_every=t.checkpoint_every,
            divergence_threshold=t.divergence_threshold, forcing=self.input_field_params(),
            warm_start_time=self.problem.warm_start_time, cg_tol=t.cg_tol, pool=t.pool,
        )

    def eval_protocol(self) -> EvalProtocol:
        horizon = 1 if self.eval.protocol == EvalProtocolKind.ONE_STEP else self.eval.horizon
        return EvalProtocol(self.eval.protocol, horizon)


def _coerce(value: Any, hint: Any, path: str) -> Any:
    origin = get_origin(hint)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError:
            choices = ", ".join(member.value for member in hint)
            raise ConfigError(f"unknown value {value!r} (expected one of: {choices})", path) from None
    if isinstance(hint, type) and dataclasses.is_dataclass(hint):
        return parse_dataclass(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected a boolean, got {value!r}", path)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if hint is float:
        # PyYAML reads exponent literals without a dot (1e-3) as strings.
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"expected a number, got {value!r}", path) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", path)
        args = get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(item, args[0], f"{path}[{i}]") for i, item in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"expected {len(args)} entries, got {len(value)}", path)
        return tuple(_coerce(item, arg, f"{path}[{i}]") for i, (item, arg) in enumerate(zip(value, args)))
    return value


def parse_dataclass(cls, data: Any, path: str = ""):
    """Strictly build `cls` from a mapping: unknown keys and wrong types raise ConfigError."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"expected a mapping, got {type(data).__name__}", path or None)
    hints = get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls) if f.init]
    for key in data:
        if key not in names:
            raise ConfigError("unknown key", f"{path}.{key}" if path else str(key))
    kwargs = {}
    for field in dataclasses.fields(cls):
        if not field.init:
            continue
        child = f"{path}.{field.name}" if path else field.name
        if field.name in data:
            kwargs[field.name] = _coerce(data[field.name], hints[field.name], child)
        elif field.default is dataclasses.MISSING and field.default_factory is dataclasses.MISSING:
            raise ConfigError("missing required key", child)
    return cls(**kwargs)


def to_plain(obj: Any) -> Any:
    """Dataclasses, enums and tuples to JSON-ready dicts, strings and lists."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_plain(item) for item in obj]
    if isinstance(obj, dict):
        return {key: to_plain(value) for key, value in obj.items()}
    return obj


def parse_run_config(data: Any, seed: Optional[int] = None, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Validate a decoded document, then apply the --seed and LORDNET_OUT overrides."""
    if not isinstance(data, Mapping):
        raise ConfigError("run configuration must be a JSON object")
    config = parse_dataclass(RunConfig, data)
    environ = os.environ if environ is None else environ
    if environ.get(defaults.OUTPUT_ENV_VAR):
        config = dataclasses.replace(config, output_dir=environ[defaults.OUTPUT_ENV_VAR])
    if seed is not None:
        config = dataclasses.replace(config, seeds=dataclasses.replace(config.seeds, base=seed))
    return config


def load_run_config(path: str, seed: Optional[int] = None, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError("config file not found", path) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}", path) from None
    config = parse_run_config(data, seed, environ)
    logger.debug("loaded run config from %s", path)
    return config


def run_config_to_dict(config: RunConfig) -> Dict[str, Any]:
    return to_plain(config)
