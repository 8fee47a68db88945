"""
Tests for the LDNF field file format.
"""

import numpy as np
import pytest

from src.lordnet.errors import ConfigError
from src.lordnet.field_io import MAGIC, decode_field, encode_field, read_field, write_field


class TestFieldFiles:
    """Test cases for encoding, decoding and file round trips."""

    def setup_method(self):
        """Set up common test data."""
        self.field = np.random.default_rng(0).standard_normal((3, 4, 5))

    def test_round_trip_is_exact(self, tmp_path):
        """Test that a written field reads back bit for bit."""
        path = tmp_path / "nested" / "field.ldnf"
        write_field(path, self.field)
        loaded = read_field(path)
        assert loaded.shape == (3, 4, 5)
        np.testing.assert_array_equal(loaded, self.field)

    def test_header_layout(self):
        """Test the little-endian header."""
        blob = encode_field(np.zeros((2, 3)))
        assert blob[:4] == MAGIC
        assert np.frombuffer(blob[4:20], dtype="<u4").tolist() == [1, 2, 2, 3]
        assert len(blob) == 20 + 8 * 6

    def test_scalar_and_empty_fields(self):
        """Test zero-dimensional and zero-size fields."""
        assert decode_field(encode_field(np.float64(2.5))).item() == 2.5
        assert decode_field(encode_field(np.zeros((0, 4)))).shape == (0, 4)

    def test_decoded_field_is_read_only(self):
        """Test that library fields are handed out read-only."""
        assert not decode_field(encode_field(self.field)).flags.writeable

    def test_bad_magic(self):
        """Test that foreign files are refused."""
        with pytest.raises(ConfigError, match="not an LDNF"):
            decode_field(b"NOPE" + bytes(20))

    def test_unsupported_version(self):
        """Test that other format versions are refused."""
        blob = bytearray(encode_field(np.zeros(2)))
        blob[4] = 9
        with pytest.raises(ConfigError, match="version"):
            decode_field(bytes(blob))

    def test_truncated_payload(self):
        """Test that a short payload is reported with its size."""
        blob = encode_field(np.zeros((2, 2)))
        with pytest.raises(ConfigError, match="payload"):
            decode_field(blob[:-8], "short.ldnf")
