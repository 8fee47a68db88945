import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from .config import defaults
from .errors import ConfigError


class Boundary(Enum):
    PERIODIC = "periodic"
    DIRICHLET_ZERO = "dirichlet_zero"
    LID_DRIVEN = "lid_driven"


class StabilityWarning(UserWarning):
    """The explicit time step exceeds the diffusive stability bound."""


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform n×n grid on the unit square.

    Periodic grids hold n cells of width 1/n; Dirichlet and lid-driven grids hold n
    nodes including both walls, so the mesh width is 1/(n-1).
    """
    n: int
    boundary: Boundary
    lid_speed: float = 0.0

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"grid needs at least 3 points per axis, got {self.n}", "grid.n")
        if self.boundary != Boundary.LID_DRIVEN and self.lid_speed != 0.0:
            raise ConfigError("lid_speed only applies to lid-driven grids", "problem.lid_speed")

    @property
    def delta(self) -> float:
        if self.boundary == Boundary.PERIODIC:
            return 1.0 / self.n
        return 1.0 / (self.n - 1)

    @property
    def is_periodic(self) -> bool:
        return self.boundary == Boundary.PERIODIC

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def equation_shape(self) -> Tuple[int, int]:
        """Shape of the discrete equation set: interior points for walls, all points for periodic."""
        if self.is_periodic:
            return (self.n, self.n)
        return (self.n - 2, self.n - 2)

    def coordinates(self) -> Tuple[List[float], List[float]]:
        points = [i * self.delta for i in range(self.n)]
        return points, points


@dataclass(frozen=True)
class NsParams:
    reynolds: float
    dt: float
    steps: int = 1

    def __post_init__(self):
        if self.reynolds <= 0:
            raise ConfigError(f"reynolds must be positive, got {self.reynolds}", "problem.reynolds")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}", "problem.dt")
        if self.steps < 0:
            raise ConfigError(f"steps must be non-negative, got {self.steps}", "problem.steps")

    def stability_bound(self, grid: GridSpec) -> float:
        return grid.delta ** 2 * self.reynolds / 4.0

    def check_stability(self, grid: GridSpec) -> bool:
        """Warn when the explicit scheme runs above its diffusive step bound."""
        bound = self.stability_bound(grid)
        if self.dt > bound:
            warnings.warn(
                f"dt={self.dt} exceeds the explicit stability bound {bound:.3e} on a {grid.n}x{grid.n} grid",
                StabilityWarning,
                stacklevel=2,
            )
            return False
        return True


@dataclass(frozen=True)
class RandomFieldParams:
    """Covariance amplitude·(-Δ + shift·I)^(-exponent) of a Gaussian random field."""
    amplitude: float
    shift: float
    exponent: float

    def __post_init__(self):
        if self.shift <= 0 or self.exponent <= 0:
            raise ConfigError("random field shift and exponent must be positive", "problem.forcing")

    def spec(self, n: int, seed: int, length: float = 1.0) -> "GrfSpec":
        return GrfSpec(amplitude=self.amplitude, shift=self.shift, exponent=self.exponent, n=n, seed=seed,
                       length=length)


POISSON_FORCING = RandomFieldParams(**defaults.POISSON_FORCING)
NS_INITIAL_VORTICITY = RandomFieldParams(**defaults.NS_INITIAL_VORTICITY)


@dataclass(frozen=True)
class GrfSpec:
    amplitude: float
    shift: float
    exponent: float
    n: int
    seed: int
    length: float = 1.0

    def __post_init__(self):
        if self.shift <= 0 or self.exponent <= 0:
            raise ConfigError("random field shift and exponent must be positive", "problem.forcing")
        if self.n < 1:
            raise ConfigError(f"random field size must be positive, got {self.n}", "grid.n")
        if self.length <= 0:
            raise ConfigError(f"random field torus length must be positive, got {self.length}", "grid.n")


class ResidualKind(Enum):
    POISSON_DIRICHLET = "poisson_dirichlet"
    POISSON_PERIODIC = "poisson_periodic"
    NS_LIDDRIVEN = "ns_liddriven"
    NS_PERIODIC = "ns_periodic"

    @property
    def is_poisson(self) -> bool:
        return self in (ResidualKind.POISSON_DIRICHLET, ResidualKind.POISSON_PERIODIC)

    @property
    def boundary(self) -> Boundary:
        return {
            ResidualKind.POISSON_DIRICHLET: Boundary.DIRICHLET_ZERO,
            ResidualKind.POISSON_PERIODIC: Boundary.PERIODIC,
            ResidualKind.NS_LIDDRIVEN: Boundary.LID_DRIVEN,
            ResidualKind.NS_PERIODIC: Boundary.PERIODIC,
        }[self]


@dataclass(frozen=True)
class ResidualSpec:
    kind: ResidualKind
    grid: GridSpec
    ns: Optional[NsParams] = None

    def __post_init__(self):
        if self.grid.boundary != self.kind.boundary:
            raise ConfigError(
                f"{self.kind.value} needs a {self.kind.boundary.value} grid, got {self.grid.boundary.value}",
                "problem.kind",
            )
        if not self.kind.is_poisson and self.ns is None:
            raise ConfigError(f"{self.kind.value} needs Navier-Stokes parameters", "problem")

    @property
    def field_shape(self) -> Tuple[int, int]:
        """Shape of the network input and output fields for this problem."""
        return self.grid.equation_shape


class LossKind(Enum):
    MSE = "mse"
    MSR = "msr"


class DatasetSource(Enum):
    SAMPLED_INITIALS = "sampled_initials"
    FDM_TRAJECTORIES = "fdm_trajectories"
    POOL = "pool"


class DecayUnit(Enum):
    ITERATIONS = "iterations"
    EPOCHS = "epochs"


@dataclass(frozen=True)
class PoolConfig:
    size: int = 64
    refresh_period: int = 10
    refresh_fraction: float = 0.25
    reinit_period: int = 50

    def __post_init__(self):
        if not 0.0 <= self.refresh_fraction <= 1.0:
            raise ConfigError("refresh_fraction must lie in [0, 1]", "train.pool.refresh_fraction")
        if self.size < 1 or self.refresh_period < 1 or self.reinit_period < 1:
            raise ConfigError("pool size and periods must be positive", "train.pool")


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind
    lr0: float
    decay_factor: float
    decay_every: int
    batch: int
    max_iters: int
    seed: int
    problem: ResidualSpec
    dataset_source: DatasetSource = DatasetSource.SAMPLED_INITIALS
    decay_unit: DecayUnit = DecayUnit.ITERATIONS
    num_samples: int = 256
    log_every: int = 100
    checkpoint_every: int = 0
    divergence_threshold: float = defaults.DIVERGENCE_THRESHOLD
    forcing: RandomFieldParams = POISSON_FORCING
    warm_start_time: float = defaults.WARM_START_TRAIN
    cg_tol: float = defaults.CG_TOL
    pool: PoolConfig = field(default_factory=PoolConfig)

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}", "train.lr0")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError(f"decay_factor must lie in (0, 1], got {self.decay_factor}", "train.decay_factor")
        if self.decay_every < 1:
            raise ConfigError("decay_every must be positive", "train.decay_every")
        if self.batch < 1:
            raise ConfigError("batch must be positive", "train.batch")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative", "train.max_iters")
        if self.loss == LossKind.MSR and self.dataset_source == DatasetSource.FDM_TRAJECTORIES:
            raise ConfigError("MSR training learns without solved targets; use sampled_initials or pool",
                              "train.dataset_source")
        if self.loss == LossKind.MSE and self.dataset_source == DatasetSource.POOL:
            raise ConfigError("the prediction pool only feeds MSR training", "train.dataset_source")
        if self.dataset_source == DatasetSource.POOL and self.problem.kind.is_poisson:
            raise ConfigError("the prediction pool applies to time-dependent problems", "train.dataset_source")

    def iterations_per_epoch(self) -> int:
        return max(1, math.ceil(self.num_samples / self.batch))

    def decay_interval(self) -> int:
        """Learning-rate decay interval in iterations."""
        if self.decay_unit == DecayUnit.EPOCHS:
            return self.decay_every * self.iterations_per_epoch()
        return self.decay_every


class NetworkVariant(Enum):
    POISSON_LINEAR = "poisson_linear"
    NS_LORD = "ns_lord"


class ModuleOrdering(Enum):
    EMBED_LORD_MIX = "embed_lord_mix"
    EMBED_MIX_LORD = "embed_mix_lord"


@dataclass(frozen=True)
class NetworkConfig:
    variant: NetworkVariant
    spatial_shape: Tuple[int, ...]
    channels: int = 16
    layers: int = 2
    rank: int = 1
    hidden: Tuple[int, int] = (256, 128)
    ordering: ModuleOrdering = ModuleOrdering.EMBED_MIX_LORD
    interleave_mixers: bool = False
    in_channels: int = 1
    out_channels: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.channels < 1 or self.layers < 1 or self.rank < 1:
            raise ConfigError("channels, layers and rank must be positive", "network")
        if len(self.spatial_shape) not in (2, 3) or min(self.spatial_shape) < 1:
            raise ConfigError(f"spatial_shape must hold 2 or 3 positive sizes, got {self.spatial_shape}",
                              "network.spatial_shape")
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ConfigError("hidden must hold two positive widths", "network.hidden")


class ConvBoundary(Enum):
    PERIODIC_WRAP = "periodic_wrap"
    ZERO_PAD = "zero_pad"


@dataclass(frozen=True)
class DilatedCnnConfig:
    spatial_shape: Tuple[int, int]
    channels: int = 16
    dilations: Tuple[int, ...] = ()
    boundary_mode: ConvBoundary = ConvBoundary.ZERO_PAD
    in_channels: int = 1
    out_channels: int = 1
    seed: int = 0

    @property
    def receptive_radius(self) -> int:
        return sum(self.dilations)

    @property
    def grid_diameter(self) -> int:
        return max(self.spatial_shape) - 1


class EvalProtocolKind(Enum):
    ONE_STEP = "one_step"
    ROLLOUT = "rollout"


@dataclass(frozen=True)
class EvalProtocol:
    kind: EvalProtocolKind
    horizon: int = 1

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigError("rollout horizon must be non-negative", "eval.horizon")


@dataclass
class EvalReport:
    protocol: EvalProtocol
    errors: List[float]
    mean: float
    std: float
    error_curve: List[float] = field(default_factory=list)
    median_inference_ms: Optional[float] = None

    @property
    def horizon(self) -> int:
        return self.protocol.horizon
