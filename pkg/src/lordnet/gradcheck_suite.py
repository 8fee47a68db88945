"""
The full finite-difference gradient suite: every tape op, the factored layers, the
assembled networks and the residual losses.
"""

import logging
from typing import Dict, Iterable, Optional

import numpy as np

from . import msr
from .dataclasses import (
    Boundary,
    ConvBoundary,
    DilatedCnnConfig,
    GridSpec,
    ModuleOrdering,
    NetworkConfig,
    NetworkVariant,
    NsParams,
    ResidualKind,
    ResidualSpec,
)
from .errors import ConfigError
from .models import build_cnn, build_network
from .models.lord import (
    LordFactorWeights,
    LowRankVecWeights,
    McfcWeights,
    lord2d_forward,
    lord3d_forward,
    lord_module_forward,
    lowrank_vec_forward,
    mcfc_dense_forward,
)
from .models.network import module_view
from .tensor_core.gradcheck import OP_BUILDERS, Builder, gradcheck, readout_loss

logger = logging.getLogger(__name__)

PASS_THRESHOLD = 1e-5


def _mcfc_builder(rng):
    params = {"x": rng.standard_normal((2, 3, 3, 2)), "w": rng.standard_normal((3, 4, 6))}

    def loss_fn(tape, p):
        return readout_loss(tape, mcfc_dense_forward(p["x"], McfcWeights(p["w"]), (2, 2)))
    return params, loss_fn


def _lowrank_vec_builder(rng):
    params = {"x": rng.standard_normal((2, 2, 5)), "sigma": rng.standard_normal((2, 3)),
              "a": rng.standard_normal((2, 3, 4)), "b": rng.standard_normal((2, 3, 5))}

    def loss_fn(tape, p):
        return readout_loss(tape, lowrank_vec_forward(p["x"], LowRankVecWeights(p["sigma"], p["a"], p["b"])))
    return params, loss_fn


def _lord2d_builder(rng):
    params = {"x": rng.standard_normal((2, 2, 3, 4)), "eta": rng.standard_normal((2, 2)),
              "a0": rng.standard_normal((2, 2, 3, 2)), "a1": rng.standard_normal((2, 2, 4, 3))}

    def loss_fn(tape, p):
        return readout_loss(tape, lord2d_forward(p["x"], LordFactorWeights(p["eta"], (p["a0"], p["a1"]))))
    return params, loss_fn


def _lord3d_builder(rng):
    params = {"x": rng.standard_normal((1, 1, 3, 3, 3)), "eta": rng.standard_normal((1, 2)),
              "a0": rng.standard_normal((1, 2, 3, 3)), "a1": rng.standard_normal((1, 2, 3, 2)),
              "a2": rng.standard_normal((1, 2, 3, 3))}

    def loss_fn(tape, p):
        weights = LordFactorWeights(p["eta"], (p["a0"], p["a1"], p["a2"]))
        return readout_loss(tape, lord3d_forward(p["x"], weights))
    return params, loss_fn


def _perturbed(params: Dict[str, np.ndarray], rng: np.random.Generator) -> Dict[str, np.ndarray]:
    # Move off the zero-bias, identity-shortcut initialization.
    return {name: value + 0.1 * rng.standard_normal(value.shape) for name, value in params.items()}


def _lord_module_builder(ordering: ModuleOrdering) -> Builder:
    def builder(rng):
        cfg = NetworkConfig(NetworkVariant.NS_LORD, (3, 4), channels=2, layers=1, rank=2, hidden=(3, 2),
                            ordering=ordering, seed=int(rng.integers(1 << 31)))
        model = build_network(cfg)
        params = {name[len("module0."):]: value for name, value in _perturbed(model.params, rng).items()
                  if name.startswith("module0.")}
        params["x"] = rng.standard_normal((2, 2, 3, 4))

        def loss_fn(tape, p):
            view = module_view({f"module0.{k}": v for k, v in p.items()}, "module0", 2, ordering)
            return readout_loss(tape, lord_module_forward(p["x"], view))
        return params, loss_fn
    return builder


def _model_builder(model, rng, batch: int = 2) -> tuple:
    params = _perturbed(model.params, rng)
    x = rng.standard_normal((batch, 1) + model.spatial_shape)

    def loss_fn(tape, p):
        return readout_loss(tape, model.forward(p, tape.constant(x)))
    return params, loss_fn


def _poisson_linear_builder(rng):
    cfg = NetworkConfig(NetworkVariant.POISSON_LINEAR, (4, 4), channels=2, layers=2, rank=2,
                        interleave_mixers=True, seed=int(rng.integers(1 << 31)))
    return _model_builder(build_network(cfg), rng)


def _ns_lord_builder(rng):
    cfg = NetworkConfig(NetworkVariant.NS_LORD, (4, 4), channels=2, layers=2, rank=1, hidden=(3, 2),
                        seed=int(rng.integers(1 << 31)))
    return _model_builder(build_network(cfg), rng)


def _dilated_cnn_builder(rng):
    cfg = DilatedCnnConfig((5, 5), channels=2, dilations=(1, 2, 1), boundary_mode=ConvBoundary.ZERO_PAD,
                           seed=int(rng.integers(1 << 31)))
    return _model_builder(build_cnn(cfg), rng)


def _poisson_msr_builder(rng):
    spec = ResidualSpec(ResidualKind.POISSON_PERIODIC, GridSpec(4, Boundary.PERIODIC))
    forcing = rng.standard_normal((2, 1, 4, 4))
    params = {"u": rng.standard_normal((2, 1, 4, 4))}
    return params, lambda tape, p: msr.msr_loss(msr.poisson_residual(p["u"], forcing, spec))


def _ns_msr_builder(rng):
    grid = GridSpec(6, Boundary.LID_DRIVEN, lid_speed=1.0)
    spec = ResidualSpec(ResidualKind.NS_LIDDRIVEN, grid, NsParams(100.0, 1e-3))
    psi_t = 0.01 * rng.standard_normal((2, 1, 4, 4))
    params = {"psi": rng.standard_normal((2, 1, 4, 4))}
    return params, lambda tape, p: msr.msr_loss(msr.ns_residual(psi_t, p["psi"], spec))


LAYER_BUILDERS: Dict[str, Builder] = {
    "mcfc_dense": _mcfc_builder,
    "lowrank_vec": _lowrank_vec_builder,
    "lord2d": _lord2d_builder,
    "lord3d": _lord3d_builder,
    "lord_module_embed_lord_mix": _lord_module_builder(ModuleOrdering.EMBED_LORD_MIX),
    "lord_module_embed_mix_lord": _lord_module_builder(ModuleOrdering.EMBED_MIX_LORD),
}

NETWORK_BUILDERS: Dict[str, Builder] = {
    "poisson_linear": _poisson_linear_builder,
    "ns_lord": _ns_lord_builder,
    "dilated_cnn": _dilated_cnn_builder,
}

LOSS_BUILDERS: Dict[str, Builder] = {
    "msr_poisson_periodic": _poisson_msr_builder,
    "msr_ns_liddriven": _ns_msr_builder,
}


def suite_builders() -> Dict[str, Builder]:
    builders: Dict[str, Builder] = {}
    for group in (OP_BUILDERS, LAYER_BUILDERS, NETWORK_BUILDERS, LOSS_BUILDERS):
        builders.update(group)
    return builders


def run_suite(seeds: Iterable[int] = range(10), names: Optional[Iterable[str]] = None) -> Dict[str, float]:
    """
    Worst relative deviation per check over all seeds.

    Args:
        seeds: Seeds handed to every builder.
        names: Restrict the run to these checks; all of them by default.
    """
    builders = suite_builders()
    selected = list(builders) if names is None else list(names)
    unknown = [name for name in selected if name not in builders]
    if unknown:
        raise ConfigError(f"unknown gradcheck entries: {', '.join(unknown)}", "gradcheck")
    seeds = list(seeds)
    results: Dict[str, float] = {}
    for name in selected:
        builder = builders[name]
        results[name] = max(gradcheck(builder, seed) for seed in seeds) if seeds else 0.0
        logger.info("gradcheck %-28s max deviation %.3e", name, results[name])
    return results


def failures(results: Dict[str, float], threshold: float = PASS_THRESHOLD) -> Dict[str, float]:
    return {name: deviation for name, deviation in results.items() if not deviation < threshold}
