import logging
import os
from typing import Dict, List, Optional

import numpy as np
import yaml
from tqdm import tqdm

from . import fdm
from .config import defaults
from .dataclasses import GridSpec, NsParams, RandomFieldParams
from .field_io import read_field, write_field
from .randfield import derive_seed, sample_field
from .tensor_core.field import Field, as_field

logger = logging.getLogger(__name__)


def initial_vorticity(params: RandomFieldParams, grid: GridSpec, base_seed: int, split: int, index: int) -> Field:
    return sample_field(params, grid, derive_seed(base_seed, split, index))


def compute_warm_states(params: RandomFieldParams, grid: GridSpec, ns: NsParams, base_seed: int, split: int,
                        count: int, t0: float, tol: float = defaults.CG_TOL, progress: bool = False) -> np.ndarray:
    """Full-grid stream functions after integrating `count` sampled vorticities up to t0."""
    states = np.zeros((count,) + grid.shape)
    for index in tqdm(range(count), desc="warm start", disable=not progress):
        omega = initial_vorticity(params, grid, base_seed, split, index)
        states[index] = fdm.ns_advance(omega, grid, ns, t0, tol)
    return states


class WarmStartCache:
    """
    On-disk store of warm-started Navier-Stokes states behind a YAML index.

    Each entry is keyed by the grid, the physics constants, the random-field parameters,
    the warm-start time, the solver tolerance and the seed range, and points at one LDNF
    file holding the stacked states.
    """

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        self.index_path = os.path.join(cache_dir, "index.yaml")
        self.entries: Dict[str, dict] = {}
        if os.path.exists(self.index_path):
            self._load_index()

    @staticmethod
    def make_key(params: RandomFieldParams, grid: GridSpec, ns: NsParams, base_seed: int, split: int,
                 count: int, t0: float, tol: float) -> dict:
        return {
            "n": grid.n,
            "boundary": grid.boundary.value,
            "lid_speed": float(grid.lid_speed),
            "reynolds": float(ns.reynolds),
            "dt": float(ns.dt),
            "amplitude": float(params.amplitude),
            "shift": float(params.shift),
            "exponent": float(params.exponent),
            "t0": float(t0),
            "tol": float(tol),
            "base_seed": int(base_seed),
            "split": int(split),
            "count": int(count),
        }

    @staticmethod
    def _key_id(key: dict) -> str:
        return "-".join(f"{name}={key[name]}" for name in sorted(key))

    def get_states(self, params: RandomFieldParams, grid: GridSpec, ns: NsParams, base_seed: int, split: int,
                   count: int, t0: float, tol: float = defaults.CG_TOL, progress: bool = False) -> Field:
        """
        Cached states for the key, computing and storing them on a miss.

        Args:
            params: Random-field parameters of the initial vorticity.
            grid: Lid-driven or periodic grid.
            ns: Physics constants; only reynolds and dt enter the key.
            base_seed: Base seed the per-sample seeds derive from.
            split: Seed stream (train or test).
            count: Number of states.
            t0: Warm-start time.
            tol: CG tolerance of every Poisson solve on the way to t0.
        """
        key = self.make_key(params, grid, ns, base_seed, split, count, t0, tol)
        key_id = self._key_id(key)
        entry = self.entries.get(key_id)
        if entry is not None:
            path = os.path.join(self.cache_dir, entry["file"])
            if os.path.exists(path):
                logger.debug("warm-start cache hit: %s", entry["file"])
                return read_field(path)
            logger.warning("warm-start cache entry %s lost its file; recomputing", entry["file"])

        states = compute_warm_states(params, grid, ns, base_seed, split, count, t0, tol, progress)
        filename = f"warm_{len(self.entries):04d}.ldnf"
        write_field(os.path.join(self.cache_dir, filename), states)
        self.entries[key_id] = {"key": key, "file": filename}
        self._save_index()
        logger.info("warm-start cache: stored %d states in %s", count, filename)
        return as_field(states)

    def get_all_entries(self) -> List[dict]:
        return list(self.entries.values())

    def _save_index(self) -> None:
        os.makedirs(self.cache_dir, exist_ok=True)
        with open(self.index_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(list(self.entries.values()), f, default_flow_style=False, sort_keys=True)

    def _load_index(self) -> None:
        with open(self.index_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)

        if not data:
            logger.warning("no entries found in warm-start index %s", self.index_path)
            return

        for entry in data:
            try:
                key = entry["key"]
                self.entries[self._key_id(key)] = {"key": key, "file": str(entry["file"])}
            except (KeyError, TypeError) as e:
                logger.warning("could not load warm-start entry %r: %s", entry, e)
                continue


def resolve_cache(directory: Optional[str]) -> Optional[WarmStartCache]:
    return WarmStartCache(directory) if directory else None
