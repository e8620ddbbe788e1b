"""Deterministic raster images of basin grids (PPM always, PNG via zlib)."""
from __future__ import annotations

import colorsys
import math
import re
import struct
import zlib

import numpy as np

from .grid import (
    LABEL_ESCAPE_UNCLUSTERED,
    LABEL_INDETERMINATE,
    LABEL_POLE,
    BasinGrid,
    GridSpec,
    escape_label,
)

__all__ = ["palette", "render_rgb", "overlay_points", "write_ppm", "write_png", "encode_ppm", "encode_png", "read_ppm"]

GOLDEN_ANGLE = (3 - math.sqrt(5)) * math.pi  # radians
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
GREY = (128, 128, 128)
DARK_GREY = (64, 64, 64)


def _rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(h % 1.0, s, v)
    return (round(255 * r), round(255 * g), round(255 * b))


def palette(grid: BasinGrid) -> dict[int, tuple[int, int, int]]:
    """Label -> color.

    A lone root gets white; several roots get golden-angle hues in root-id
    order.  Escape clusters get muted hues keyed to their direction, so the
    same petal keeps its color across resolutions.
    """
    colors: dict[int, tuple[int, int, int]] = {
        LABEL_INDETERMINATE: GREY,
        LABEL_POLE: BLACK,
        LABEL_ESCAPE_UNCLUSTERED: DARK_GREY,
    }
    roots = grid.registry.roots
    if len(roots) == 1:
        colors[roots[0].root_id] = WHITE
    else:
        for r in roots:
            colors[r.root_id] = _rgb(r.root_id * GOLDEN_ANGLE / (2 * math.pi), 0.75, 0.95)
    for k, d in enumerate(grid.cluster_directions):
        colors[escape_label(k)] = _rgb(d / (2 * math.pi), 0.45, 0.7)
    return colors


def render_rgb(grid: BasinGrid) -> np.ndarray:
    """(rows, columns, 3) uint8 image; row 0 is the top (largest imaginary part)."""
    colors = palette(grid)
    out = np.empty(grid.labels.shape + (3,), dtype=np.uint8)
    out[:] = GREY
    for label, color in colors.items():
        out[grid.labels == label] = color
    return out


def overlay_points(rgb: np.ndarray, spec: GridSpec, points, color=(255, 0, 0)) -> np.ndarray:
    """Copy of ``rgb`` with the pixels containing ``points`` painted."""
    out = rgb.copy()
    row, col = spec.pixel_of(np.asarray(points))
    inside = row >= 0
    out[row[inside], col[inside]] = color
    return out


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def _chunk(tag: bytes, data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)


def encode_png(rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    # filter byte 0 (None) before every scanline
    raw = np.concatenate([np.zeros((h, 1), dtype=np.uint8), rgb.reshape(h, 3 * w)], axis=1).tobytes()
    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + _chunk(b"IHDR", header) + _chunk(b"IDAT", zlib.compress(raw, 9)) + _chunk(b"IEND", b"")


def write_ppm(path, rgb: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(rgb))


def write_png(path, rgb: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(rgb))


def read_ppm(path) -> np.ndarray:
    data = open(path, "rb").read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise ValueError("not an 8-bit binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=m.end()).reshape(h, w, 3)
