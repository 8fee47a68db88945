"""
Linear dilated-convolution baseline for the Poisson comparison.
"""

import logging
from dataclasses import replace
from typing import Dict, Tuple

import numpy as np

from ..dataclasses import DilatedCnnConfig
from ..errors import ConfigError
from ..tensor_core import ops
from ..tensor_core.tape import DiffValue
from .network import Model, _Initializer

logger = logging.getLogger(__name__)


def doubling_dilations(diameter: int) -> Tuple[int, ...]:
    """1, 2, 4, ... until the summed dilation reaches `diameter`."""
    dilations = []
    while sum(dilations) < diameter:
        dilations.append(1 << len(dilations))
    return tuple(dilations) or (1,)


def build_cnn(cfg: DilatedCnnConfig) -> Model:
    """
    Stack of bias-free 3×3 dilated convolutions in_channels → C → … → out_channels.

    An empty `dilations` tuple picks the doubling sequence that covers the grid.
    """
    if cfg.channels < 1:
        raise ConfigError("channels must be positive", "network.channels")
    if not cfg.dilations:
        cfg = replace(cfg, dilations=doubling_dilations(cfg.grid_diameter))
    if any(d < 1 for d in cfg.dilations):
        raise ConfigError(f"dilations must be positive, got {cfg.dilations}", "network.dilations")
    if cfg.receptive_radius < cfg.grid_diameter:
        raise ConfigError(
            f"receptive radius {cfg.receptive_radius} does not cover the grid diameter {cfg.grid_diameter}",
            "network.dilations",
        )

    init = _Initializer(cfg.seed)
    depth = len(cfg.dilations)
    widths = [cfg.in_channels] + [cfg.channels] * (depth - 1) + [cfg.out_channels]
    for layer in range(depth):
        c_in, c_out = widths[layer], widths[layer + 1]
        init.normal(f"conv{layer}.w", (c_out, c_in, 3, 3), 1.0 / np.sqrt(9 * c_in))

    def forward(handles: Dict[str, DiffValue], x: DiffValue) -> DiffValue:
        y = x
        for layer, dilation in enumerate(cfg.dilations):
            y = ops.conv2d_dilated(y, handles[f"conv{layer}.w"], dilation, cfg.boundary_mode)
        return y

    model = Model(cfg, init.params, forward)
    logger.info("built dilated CNN with dilations %s and %d parameters", cfg.dilations, model.parameter_count)
    return model
