"""Affine pixel <-> planar coordinate mapping for north-up rasters.

All planar coordinates are in projected meters (e.g. an Albers grid).
Pixel indices follow the usual raster convention: integer ``(col, row)``
addresses the top-left corner of a pixel, ``row`` grows downward, and the
pixel center sits at ``(col + 0.5, row + 0.5)``. Rotation terms are fixed
to zero.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine transform between pixel and planar coordinates.

    Attributes
    ----------
    origin_x, origin_y:
        Planar coordinates of the top-left corner of pixel (0, 0).
    pixel_w:
        Pixel width in meters, > 0.
    pixel_h:
        Pixel height in meters per row step; negative for north-up grids.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float

    def __post_init__(self):
        if self.pixel_w <= 0:
            raise ValueError(f"pixel_w must be > 0, got {self.pixel_w}")
        if self.pixel_h == 0:
            raise ValueError("pixel_h must be nonzero")

    def pixel_to_planar(self, col: float, row: float) -> tuple[float, float]:
        """Planar coordinates of fractional pixel position (col, row)."""
        return (
            self.origin_x + col * self.pixel_w,
            self.origin_y + row * self.pixel_h,
        )

    def planar_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Fractional (col, row) of a planar point; inverse of pixel_to_planar."""
        return (
            (x - self.origin_x) / self.pixel_w,
            (y - self.origin_y) / self.pixel_h,
        )

    def pixel_center(self, col: int, row: int) -> tuple[float, float]:
        """Planar coordinates of the center of integer pixel (col, row)."""
        return self.pixel_to_planar(col + 0.5, row + 0.5)

    def containing_pixel(self, x: float, y: float) -> tuple[int, int]:
        """Integer (col, row) of the pixel containing a planar point."""
        import math

        c, r = self.planar_to_pixel(x, y)
        return int(math.floor(c)), int(math.floor(r))

    def window_transform(self, col0: int, row0: int) -> "GeoTransform":
        """Transform of a window whose top-left pixel is (col0, row0)."""
        ox, oy = self.pixel_to_planar(col0, row0)
        return GeoTransform(ox, oy, self.pixel_w, self.pixel_h)

    def bounds(self, width: int, height: int) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of a width x height raster under this transform."""
        x0, y0 = self.pixel_to_planar(0, 0)
        x1, y1 = self.pixel_to_planar(width, height)
        return min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)

    def to_tuple(self) -> tuple[float, float, float, float, float, float]:
        """Six-value affine (origin_x, pixel_w, 0, origin_y, 0, pixel_h)."""
        return (self.origin_x, self.pixel_w, 0.0, self.origin_y, 0.0, self.pixel_h)

    @classmethod
    def from_tuple(cls, values) -> "GeoTransform":
        vals = [float(v) for v in values]
        if len(vals) != 6:
            raise ValueError(f"geotransform needs 6 values, got {len(vals)}")
        if vals[2] != 0.0 or vals[4] != 0.0:
            raise ValueError("rotation terms must be zero")
        return cls(origin_x=vals[0], pixel_w=vals[1], origin_y=vals[3], pixel_h=vals[5])
