"""
Network assembly: a named parameter set plus a pure forward function.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np

from ..dataclasses import DilatedCnnConfig, ModuleOrdering, NetworkConfig, NetworkVariant
from ..errors import ConfigError, ShapeError
from ..tensor_core import ops
from ..tensor_core.field import Field, as_field
from ..tensor_core.tape import DiffValue, Tape
from .lord import LordFactorWeights, LordModuleParams, lord_forward, lord_module_forward

logger = logging.getLogger(__name__)

ForwardFn = Callable[[Dict[str, DiffValue], DiffValue], DiffValue]


@dataclass
class Model:
    """
    Parameters are plain read-only arrays keyed by name; `forward` reads them through tape
    handles so the same model serves training (variables) and inference (constants).
    """
    config: Union[NetworkConfig, DilatedCnnConfig]
    params: Dict[str, Field]
    forward_fn: ForwardFn

    @property
    def kind(self) -> str:
        if isinstance(self.config, DilatedCnnConfig):
            return "dilated_cnn"
        return self.config.variant.value

    @property
    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    @property
    def spatial_shape(self):
        return tuple(self.config.spatial_shape)

    def register(self, tape: Tape) -> Dict[str, DiffValue]:
        return {name: tape.variable(value, name) for name, value in self.params.items()}

    def forward(self, handles: Dict[str, DiffValue], x: DiffValue) -> DiffValue:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels or x.shape[2:] != self.spatial_shape:
            raise ShapeError(f"{self.kind} expects B×{self.config.in_channels}×{self.spatial_shape}", x.shape)
        return self.forward_fn(handles, x)

    def predict(self, inputs) -> Field:
        """Evaluate without gradients. 2D inputs are treated as a single-sample, single-channel batch."""
        array = np.asarray(inputs, dtype=np.float64)
        squeeze = array.ndim == 2
        if squeeze:
            array = array[None, None]
        tape = Tape()
        handles = {name: tape.constant(value) for name, value in self.params.items()}
        out = self.forward(handles, tape.constant(array)).value
        return as_field(out[0, 0] if squeeze else out)

    def with_params(self, params: Dict[str, np.ndarray]) -> "Model":
        if set(params) != set(self.params):
            raise ConfigError("parameter names do not match the model", "checkpoint")
        for name, value in params.items():
            if np.shape(value) != self.params[name].shape:
                raise ShapeError(f"parameter {name} has the wrong shape", np.shape(value), self.params[name].shape)
        return Model(self.config, {name: as_field(params[name]) for name in self.params}, self.forward_fn)


class _Initializer:
    """Seeded parameter factory; insertion order fixes the draw order."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.params: Dict[str, Field] = {}

    def normal(self, name: str, shape, std: float) -> None:
        self.params[name] = as_field(self.rng.normal(0.0, std, size=shape))

    def zeros(self, name: str, shape) -> None:
        self.params[name] = as_field(np.zeros(shape))

    def ones(self, name: str, shape) -> None:
        self.params[name] = as_field(np.ones(shape))

    def identity(self, name: str, size: int) -> None:
        self.params[name] = as_field(np.eye(size))

    def conv1x1(self, prefix: str, c_out: int, c_in: int, bias: bool) -> None:
        self.normal(f"{prefix}.w", (c_out, c_in), 1.0 / np.sqrt(c_in))
        if bias:
            self.zeros(f"{prefix}.b", (c_out,))

    def factors(self, prefix: str, channels: int, rank: int, shape) -> None:
        self.ones(f"{prefix}.eta", (channels, rank))
        for axis, size in enumerate(shape):
            self.normal(f"{prefix}.a{axis}", (channels, rank, size, size), 1.0 / np.sqrt(size))


def factor_view(handles: Dict[str, DiffValue], prefix: str, spatial_rank: int) -> LordFactorWeights:
    return LordFactorWeights(
        eta=handles[f"{prefix}.eta"],
        factors=tuple(handles[f"{prefix}.a{axis}"] for axis in range(spatial_rank)),
    )


def module_view(handles: Dict[str, DiffValue], prefix: str, spatial_rank: int,
                ordering: ModuleOrdering) -> LordModuleParams:
    return LordModuleParams(
        embed_in_w=handles[f"{prefix}.embed_in.w"],
        embed_in_b=handles[f"{prefix}.embed_in.b"],
        embed_out_w=handles[f"{prefix}.embed_out.w"],
        embed_out_b=handles[f"{prefix}.embed_out.b"],
        factors=factor_view(handles, f"{prefix}.lord", spatial_rank),
        mixer_w=handles[f"{prefix}.mixer.w"],
        mixer_b=handles[f"{prefix}.mixer.b"],
        shortcut_w=handles[f"{prefix}.shortcut.w"],
        shortcut_b=handles[f"{prefix}.shortcut.b"],
        ordering=ordering,
    )


def _build_poisson_linear(cfg: NetworkConfig) -> Model:
    init = _Initializer(cfg.seed)
    spatial_rank = len(cfg.spatial_shape)
    init.conv1x1("lift", cfg.channels, cfg.in_channels, bias=False)
    for layer in range(cfg.layers):
        init.factors(f"lord{layer}", cfg.channels, cfg.rank, cfg.spatial_shape)
        if cfg.interleave_mixers and layer < cfg.layers - 1:
            init.conv1x1(f"mix{layer}", cfg.channels, cfg.channels, bias=False)
    init.conv1x1("head", cfg.out_channels, cfg.channels, bias=False)

    def forward(handles: Dict[str, DiffValue], x: DiffValue) -> DiffValue:
        y = ops.conv1x1(x, handles["lift.w"])
        for layer in range(cfg.layers):
            y = lord_forward(y, factor_view(handles, f"lord{layer}", spatial_rank))
            if cfg.interleave_mixers and layer < cfg.layers - 1:
                y = ops.conv1x1(y, handles[f"mix{layer}.w"])
        return ops.conv1x1(y, handles["head.w"])

    return Model(cfg, init.params, forward)


def _build_ns_lord(cfg: NetworkConfig) -> Model:
    init = _Initializer(cfg.seed)
    spatial_rank = len(cfg.spatial_shape)
    wide, narrow = cfg.hidden
    lord_channels = narrow if cfg.ordering == ModuleOrdering.EMBED_LORD_MIX else cfg.channels

    init.conv1x1("lift", cfg.channels, cfg.in_channels, bias=True)
    for layer in range(cfg.layers):
        prefix = f"module{layer}"
        init.conv1x1(f"{prefix}.embed_in", wide, cfg.channels, bias=True)
        init.conv1x1(f"{prefix}.embed_out", narrow, wide, bias=True)
        init.factors(f"{prefix}.lord", lord_channels, cfg.rank, cfg.spatial_shape)
        init.conv1x1(f"{prefix}.mixer", cfg.channels, narrow, bias=True)
        init.identity(f"{prefix}.shortcut.w", cfg.channels)
        init.zeros(f"{prefix}.shortcut.b", (cfg.channels,))
    init.conv1x1("head", cfg.out_channels, cfg.channels, bias=True)

    def forward(handles: Dict[str, DiffValue], x: DiffValue) -> DiffValue:
        y = ops.conv1x1(x, handles["lift.w"], handles["lift.b"])
        for layer in range(cfg.layers):
            y = lord_module_forward(y, module_view(handles, f"module{layer}", spatial_rank, cfg.ordering))
        return ops.conv1x1(y, handles["head.w"], handles["head.b"])

    return Model(cfg, init.params, forward)


def build_network(cfg: NetworkConfig) -> Model:
    """Build the Poisson linear network or the Navier-Stokes Lord network, seeded by cfg.seed."""
    if not isinstance(cfg, NetworkConfig):
        raise ConfigError(f"expected a NetworkConfig, got {type(cfg).__name__}", "network")
    if cfg.variant == NetworkVariant.POISSON_LINEAR:
        model = _build_poisson_linear(cfg)
    else:
        model = _build_ns_lord(cfg)
    logger.info("built %s network with %d parameters", cfg.variant.value, model.parameter_count)
    return model
