from ..dataclasses import DilatedCnnConfig
from .dilated_cnn import build_cnn, doubling_dilations
from .lord import (
    CpFactors,
    LordFactorWeights,
    LordModuleParams,
    LowRankVecWeights,
    McfcWeights,
    cp_specialization_check,
    lord2d_forward,
    lord3d_forward,
    lord_module_forward,
    lowrank_vec_forward,
    materialize_dense,
    mcfc_dense_forward,
)
from .network import Model, build_network


def build_model(cfg):
    """Dispatch on the config type."""
    if isinstance(cfg, DilatedCnnConfig):
        return build_cnn(cfg)
    return build_network(cfg)


__all__ = [
    "CpFactors", "LordFactorWeights", "LordModuleParams", "LowRankVecWeights", "McfcWeights",
    "Model", "build_cnn", "build_model", "build_network", "cp_specialization_check",
    "doubling_dilations", "lord2d_forward", "lord3d_forward", "lord_module_forward",
    "lowrank_vec_forward", "materialize_dense", "mcfc_dense_forward",
]
