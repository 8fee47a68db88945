"""
Model checkpoints: a directory holding manifest.json plus one LDNF file per parameter.
"""

import json
import logging
import os
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .config.run_config import parse_dataclass, to_plain
from .dataclasses import DilatedCnnConfig, NetworkConfig
from .errors import ConfigError
from .field_io import read_field, write_field
from .models import Model, build_model

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FORMAT = "lordnet-checkpoint"


def _param_file(name: str) -> str:
    return os.path.join("params", f"{name}.ldnf")


def save_checkpoint(model: Model, directory: str, iteration: int, params: Optional[Dict[str, np.ndarray]] = None,
                    extra: Optional[Dict[str, Any]] = None) -> str:
    """Write `params` (default: the model's own) under `directory`; returns the manifest path."""
    params = model.params if params is None else params
    os.makedirs(os.path.join(directory, "params"), exist_ok=True)
    entries = []
    for name, value in params.items():
        filename = _param_file(name)
        write_field(os.path.join(directory, filename), value)
        entries.append({"name": name, "shape": list(np.shape(value)), "file": filename.replace(os.sep, "/")})

    manifest = {
        "format": FORMAT,
        "version": 1,
        "model": model.kind,
        "config": to_plain(model.config),
        "iteration": int(iteration),
        "parameter_count": int(sum(np.size(v) for v in params.values())),
        "parameters": entries,
    }
    if extra:
        manifest.update(to_plain(extra))
    path = os.path.join(directory, MANIFEST)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug("checkpoint at iteration %d written to %s", iteration, directory)
    return path


def _config_from_manifest(manifest: dict, source: str):
    data = dict(manifest.get("config") or {})
    kind = manifest.get("model")
    if kind == "dilated_cnn":
        cls = DilatedCnnConfig
    elif kind in ("poisson_linear", "ns_lord"):
        cls = NetworkConfig
    else:
        raise ConfigError(f"unknown model kind {kind!r}", f"{source}.model")
    return parse_dataclass(cls, data, f"{source}.config")


def load_checkpoint(directory: str) -> Tuple[Model, int]:
    """Rebuild the model from the manifest and load its parameters; returns (model, iteration)."""
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise ConfigError("checkpoint manifest not found", path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid checkpoint manifest: {exc}", path) from None
    if manifest.get("format") != FORMAT:
        raise ConfigError("not a lordnet checkpoint", path)

    model = build_model(_config_from_manifest(manifest, MANIFEST))
    params = {
        entry["name"]: read_field(os.path.join(directory, entry["file"]))
        for entry in manifest.get("parameters", [])
    }
    return model.with_params(params), int(manifest.get("iteration", 0))
