"""
Tests for the warm-start state cache.
"""

from unittest.mock import patch

import numpy as np
import yaml

from src.lordnet.dataclasses import NS_INITIAL_VORTICITY, Boundary, GridSpec, NsParams
from src.lordnet.warm_start import WarmStartCache, resolve_cache


class TestWarmStartCache:
    """Test cases for cache hits, misses and the YAML index."""

    def setup_method(self):
        """Set up common test data."""
        self.grid = GridSpec(n=8, boundary=Boundary.LID_DRIVEN, lid_speed=1.0)
        self.ns = NsParams(reynolds=1000.0, dt=0.01)
        self.states = np.arange(2 * 8 * 8, dtype=float).reshape(2, 8, 8)

    def _get(self, cache, t0=0.5, base_seed=0, tol=1e-10):
        return cache.get_states(NS_INITIAL_VORTICITY, self.grid, self.ns, base_seed, 0, 2, t0, tol)

    @patch("src.lordnet.warm_start.compute_warm_states")
    def test_miss_computes_and_stores(self, mock_compute, tmp_path):
        """Test that a miss computes the states and writes the index."""
        mock_compute.return_value = self.states
        cache = WarmStartCache(str(tmp_path))
        result = self._get(cache)

        np.testing.assert_array_equal(result, self.states)
        assert mock_compute.call_count == 1
        assert (tmp_path / "warm_0000.ldnf").exists()
        index = yaml.safe_load((tmp_path / "index.yaml").read_text())
        assert index[0]["file"] == "warm_0000.ldnf"
        assert index[0]["key"]["t0"] == 0.5

    @patch("src.lordnet.warm_start.compute_warm_states")
    def test_hit_skips_compute(self, mock_compute, tmp_path):
        """Test that a reloaded cache serves stored states without recomputing."""
        mock_compute.return_value = self.states
        self._get(WarmStartCache(str(tmp_path)))

        reloaded = WarmStartCache(str(tmp_path))
        assert len(reloaded.get_all_entries()) == 1
        result = self._get(reloaded)
        np.testing.assert_array_equal(result, self.states)
        assert mock_compute.call_count == 1

    @patch("src.lordnet.warm_start.compute_warm_states")
    def test_different_keys_get_new_files(self, mock_compute, tmp_path):
        """Test that the warm-start time and seed are part of the key."""
        mock_compute.return_value = self.states
        cache = WarmStartCache(str(tmp_path))
        self._get(cache)
        self._get(cache, t0=1.0)
        self._get(cache, base_seed=5)
        assert mock_compute.call_count == 3
        assert sorted(entry["file"] for entry in cache.get_all_entries()) == [
            "warm_0000.ldnf", "warm_0001.ldnf", "warm_0002.ldnf"]

    @patch("src.lordnet.warm_start.compute_warm_states")
    def test_solver_tolerance_is_part_of_key(self, mock_compute, tmp_path):
        """Test that a changed CG tolerance does not reuse states solved at another tolerance."""
        mock_compute.return_value = self.states
        cache = WarmStartCache(str(tmp_path))
        self._get(cache, tol=1e-10)
        self._get(cache, tol=1e-6)
        assert mock_compute.call_count == 2
        assert mock_compute.call_args[0][7] == 1e-6
        tolerances = sorted(entry["key"]["tol"] for entry in cache.get_all_entries())
        assert tolerances == [1e-10, 1e-6]

        self._get(WarmStartCache(str(tmp_path)), tol=1e-6)
        assert mock_compute.call_count == 2

    @patch("src.lordnet.warm_start.compute_warm_states")
    def test_lost_file_recomputes(self, mock_compute, tmp_path):
        """Test that an index entry without its file is recomputed."""
        mock_compute.return_value = self.states
        cache = WarmStartCache(str(tmp_path))
        self._get(cache)
        (tmp_path / "warm_0000.ldnf").unlink()
        self._get(WarmStartCache(str(tmp_path)))
        assert mock_compute.call_count == 2

    def test_empty_index(self, tmp_path):
        """Test that an empty index file leaves the cache empty."""
        (tmp_path / "index.yaml").write_text("")
        assert WarmStartCache(str(tmp_path)).get_all_entries() == []

    def test_resolve_cache(self, tmp_path):
        """Test that no directory means no cache."""
        assert resolve_cache(None) is None
        assert isinstance(resolve_cache(str(tmp_path)), WarmStartCache)
