"""
Scalar heatmaps (8-bit PGM with a JSON sidecar) and full-precision CSV tables.
"""

import csv
import json
import logging
import os
from typing import Optional, Sequence, Tuple

import numpy as np

from .csv_writer import format_real
from .errors import ConfigError, ShapeError
from .tensor_core.field import Field, as_field

logger = logging.getLogger(__name__)

GRAY_LEVELS = 255


def parse_index(text: Optional[str]) -> Tuple[int, ...]:
    """'3' or '0,2' to a tuple of leading-axis indices; empty or None selects nothing."""
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"index must be comma-separated integers, got {text!r}", "--index") from None


def select_slice(field, index: Sequence[int] = ()) -> Field:
    """Index the leading axes of `field` until a 2D slice remains."""
    array = np.asarray(field, dtype=np.float64)
    if len(index) > max(array.ndim - 2, 0):
        raise ShapeError(f"index {tuple(index)} leaves fewer than two axes", array.shape)
    for position, value in enumerate(index):
        if not 0 <= value < array.shape[0]:
            raise ShapeError(f"index {value} out of range on axis {position}", array.shape)
        array = array[value]
    if array.ndim != 2:
        hint = ",".join(["0"] * (array.ndim - 2)) if array.ndim > 2 else ""
        suggestion = f"; select a 2D slice with --index {hint}" if hint else ""
        raise ShapeError(f"rendering needs a 2D field, got {array.ndim}D{suggestion}", array.shape)
    return as_field(array)


def gray_levels(field) -> Tuple[np.ndarray, float, float]:
    """
    Min-max normalized 8-bit levels in image orientation.

    Image rows run from j = n-1 (top) down to j = 0; columns run along i. A constant
    field maps to uniform mid gray.
    """
    array = np.asarray(field, dtype=np.float64)
    low, high = float(array.min()), float(array.max())
    if high > low:
        levels = np.rint((array - low) / (high - low) * GRAY_LEVELS)
    else:
        levels = np.full(array.shape, (GRAY_LEVELS + 1) // 2)
    return levels.T[::-1].astype(np.uint8), low, high


def encode_pgm(field, binary: bool = False) -> Tuple[bytes, dict]:
    """P5 (binary) or P2 (plain) bytes plus the normalization record for the sidecar."""
    image, low, high = gray_levels(field)
    height, width = image.shape
    if binary:
        body = f"P5\n{width} {height}\n{GRAY_LEVELS}\n".encode("ascii") + image.tobytes()
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in image)
        body = f"P2\n{width} {height}\n{GRAY_LEVELS}\n{rows}\n".encode("ascii")
    sidecar = {
        "format": "P5" if binary else "P2",
        "width": width,
        "height": height,
        "min": low,
        "max": high,
        "orientation": "rows j descending, columns i ascending",
    }
    return body, sidecar


def write_pgm(path: str, field, binary: bool = False) -> str:
    """Write the image and `<path>.json`; returns the sidecar path."""
    body, sidecar = encode_pgm(field, binary)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(body)
    sidecar_path = f"{path}.json"
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug("rendered %dx%d heatmap to %s", sidecar["width"], sidecar["height"], path)
    return sidecar_path


def write_csv(path: str, field) -> None:
    """One CSV row per index i, values printed so they parse back bit-exactly."""
    array = np.asarray(field, dtype=np.float64)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in array:
            writer.writerow([format_real(value) for value in row])


def read_csv(path: str) -> Field:
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = [[float(value) for value in row] for row in csv.reader(f) if row]
    return as_field(np.array(rows, dtype=np.float64))
