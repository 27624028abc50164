"""Binary PGM (P5) output and tile-grid layout."""
import math
from pathlib import Path

import numpy as np

GUTTER = 2


def write_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("PGM images must be 2-D uint8")
    h, w = image.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes())


def tile_shape(n_y):
    side = math.isqrt(n_y)
    return (side, side) if side * side == n_y else (1, n_y)


def to_intensity(values, lo, hi):
    """Linear map of [lo, hi] onto [0, 255], clamped."""
    scaled = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def minmax_intensity(values):
    """Per-tile min-max normalisation; a constant tile maps to mid gray."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.full(values.shape, 128, dtype=np.uint8)
    return to_intensity(values, lo, hi)


def grid(tiles, gutter=GUTTER, fill=0):
    """Assemble a (rows, cols, th, tw) uint8 array into one image with gutters."""
    tiles = np.asarray(tiles, dtype=np.uint8)
    rows, cols, th, tw = tiles.shape
    out = np.full((rows * th + (rows - 1) * gutter, cols * tw + (cols - 1) * gutter),
                  fill, dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            y0, x0 = r * (th + gutter), c * (tw + gutter)
            out[y0:y0 + th, x0:x0 + tw] = tiles[r, c]
    return out
