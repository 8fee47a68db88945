"""
LDNF field files.

Layout, all little-endian: magic b"LDNF", version u32, ndim u32, ndim × u32 dims, then
the float64 payload in row-major order.
"""

import os
from typing import Union

import numpy as np

from .errors import ConfigError
from .tensor_core.field import Field, as_field

MAGIC = b"LDNF"
VERSION = 1
_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")

PathLike = Union[str, os.PathLike]


def encode_field(field) -> bytes:
    array = np.asarray(field, dtype=np.float64)
    header = np.array([VERSION, array.ndim, *array.shape], dtype=_U32).tobytes()
    return MAGIC + header + np.ascontiguousarray(array, dtype=_F64).tobytes(order="C")


def decode_field(blob: bytes, source: str = "field") -> Field:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise ConfigError("not an LDNF field file", source)
    version, ndim = np.frombuffer(blob, dtype=_U32, count=2, offset=4)
    if version != VERSION:
        raise ConfigError(f"unsupported LDNF version {version}", source)
    header_end = 12 + 4 * int(ndim)
    if len(blob) < header_end:
        raise ConfigError("truncated LDNF header", source)
    dims = tuple(int(d) for d in np.frombuffer(blob, dtype=_U32, count=int(ndim), offset=12))
    expected = 8 * int(np.prod(dims, dtype=np.int64))
    if len(blob) - header_end != expected:
        raise ConfigError(f"LDNF payload holds {len(blob) - header_end} bytes, expected {expected}", source)
    payload = np.frombuffer(blob, dtype=_F64, offset=header_end, count=expected // 8)
    return as_field(payload.reshape(dims).astype(np.float64))


def write_field(path: PathLike, field) -> None:
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_field(field))


def read_field(path: PathLike) -> Field:
    with open(path, "rb") as f:
        return decode_field(f.read(), os.fspath(path))
