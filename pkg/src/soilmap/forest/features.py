"""Buffer-aggregated covariate features for the forest baseline.

Each band contributes the mean of all pixels whose centers lie within a
Euclidean buffer distance of the point (buffer 0 degenerates to the
containing pixel). Planar coordinates are appended when configured.
"""

from __future__ import annotations

import math

import numpy as np

from ..raster import CovariateStack


def extract_features(stack: CovariateStack, points: np.ndarray,
                     buffer_d: float = 50.0, include_latlon: bool = True) -> np.ndarray:
    """(n_points, n_bands [+2]) disk-mean features.

    Raises ValueError for points outside the stack or for a band with no
    valid pixel inside the buffer.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if buffer_d < 0:
        raise ValueError("buffer_d must be >= 0")
    t = stack.transform
    valid = stack.valid_mask()
    n_extra = 2 if include_latlon else 0
    out = np.empty((len(points), stack.n_bands + n_extra), dtype=np.float64)

    # pixel-center coordinate vectors
    cx = t.origin_x + (np.arange(stack.width) + 0.5) * t.pixel_w
    cy = t.origin_y + (np.arange(stack.height) + 0.5) * t.pixel_h
    reach_c = int(math.ceil(buffer_d / abs(t.pixel_w))) + 1
    reach_r = int(math.ceil(buffer_d / abs(t.pixel_h))) + 1

    for i, (x, y) in enumerate(points):
        if not stack.contains(x, y):
            raise ValueError(f"point ({x}, {y}) outside stack extent")
        col, row = t.containing_pixel(x, y)
        col = min(max(col, 0), stack.width - 1)
        row = min(max(row, 0), stack.height - 1)
        if buffer_d == 0:
            sel_rows = slice(row, row + 1)
            sel_cols = slice(col, col + 1)
            inside = np.ones((1, 1), dtype=bool)
        else:
            r0, r1 = max(0, row - reach_r), min(stack.height, row + reach_r + 1)
            c0, c1 = max(0, col - reach_c), min(stack.width, col + reach_c + 1)
            dx = cx[c0:c1] - x
            dy = cy[r0:r1] - y
            inside = (dy[:, None] ** 2 + dx[None, :] ** 2) <= buffer_d ** 2
            sel_rows, sel_cols = slice(r0, r1), slice(c0, c1)

        window = stack.data[:, sel_rows, sel_cols]
        ok = valid[:, sel_rows, sel_cols] & inside[None]
        counts = ok.sum(axis=(1, 2))
        if (counts == 0).any():
            bad = stack.band_names[int(np.argmin(counts))]
            raise ValueError(f"no valid pixels in buffer for band {bad!r} at ({x}, {y})")
        out[i, :stack.n_bands] = np.where(ok, window, 0.0).sum(axis=(1, 2)) / counts
        if include_latlon:
            out[i, stack.n_bands:] = (x, y)
    return out
