"""Multi-band raster stacks: container I/O, tile cropping, resampling.

The on-disk container is deliberately simple so that large rasters can be
read window-by-window: a UTF-8 text header of ``key: value`` lines
terminated by one blank line, followed by raw little-endian band-major
pixel data. Supported dtypes are float32 and int32.

Header keys::

    width: 512
    height: 512
    bands: 19
    band.0.name: sat_b
    band.0.group: satellite
    ...
    geotransform: 0.0, 40.0, 0.0, 20480.0, 0.0, -40.0
    dtype: float32
    nodata: -9999.0
    meta.<anything>: free-form provenance strings
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geo import GeoTransform

SATELLITE = "satellite"
COVARIATE = "covariate"

_DTYPES = {"float32": np.float32, "int32": np.int32}


class RasterFormatError(ValueError):
    """Malformed container header or payload."""


@dataclass(frozen=True)
class BandInfo:
    name: str
    group: str


@dataclass
class CovariateStack:
    """All input channels co-registered on one grid.

    ``data`` has shape (bands, height, width). Nodata pixels keep the
    sentinel value in ``data``; use :meth:`valid_mask` or impute through
    :func:`crop_tile`, which fills them with per-band means of the valid
    pixels.
    """

    data: np.ndarray
    bands: list[BandInfo]
    transform: GeoTransform
    nodata: float = -9999.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise RasterFormatError(f"expected (bands, h, w) array, got ndim={self.data.ndim}")
        if len(self.bands) != self.data.shape[0]:
            raise RasterFormatError(
                f"band list has {len(self.bands)} entries for {self.data.shape[0]} data bands"
            )

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def band_names(self) -> list[str]:
        return [b.name for b in self.bands]

    def band_index(self, name: str) -> int:
        try:
            return self.band_names.index(name)
        except ValueError:
            raise KeyError(f"no band named {name!r}") from None

    def group_indices(self, group: str) -> list[int]:
        return [i for i, b in enumerate(self.bands) if b.group == group]

    def valid_mask(self) -> np.ndarray:
        """Boolean (bands, h, w) mask of non-nodata, finite pixels."""
        return np.isfinite(self.data) & (self.data != self.nodata)

    def band_means(self) -> np.ndarray:
        """Per-band mean over valid pixels (0.0 for all-nodata bands)."""
        mask = self.valid_mask()
        sums = np.where(mask, self.data, 0.0).sum(axis=(1, 2))
        counts = mask.sum(axis=(1, 2))
        means = np.zeros(self.n_bands, dtype=np.float64)
        nz = counts > 0
        means[nz] = sums[nz] / counts[nz]
        return means

    def bounds(self) -> tuple[float, float, float, float]:
        return self.transform.bounds(self.width, self.height)

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds()
        return xmin <= x <= xmax and ymin <= y <= ymax


def stack_from_bands(bands: list[tuple[str, str, np.ndarray]], transform: GeoTransform,
                     nodata: float = -9999.0, meta: dict | None = None) -> CovariateStack:
    """Assemble a stack from (name, group, 2-D grid) triples.

    Raises RasterFormatError if the grids do not share one shape.
    """
    if not bands:
        raise RasterFormatError("no bands given")
    shape = bands[0][2].shape
    for name, _, grid in bands:
        if grid.shape != shape:
            raise RasterFormatError(
                f"band shape mismatch: {name!r} is {grid.shape}, expected {shape}"
            )
    data = np.stack([np.asarray(g, dtype=np.float32) for _, _, g in bands], axis=0)
    infos = [BandInfo(name, group) for name, group, _ in bands]
    return CovariateStack(data=data, bands=infos, transform=transform,
                          nodata=nodata, meta=dict(meta or {}))


# ---------------------------------------------------------------------------
# Container I/O


def _format_header(width: int, height: int, bands: list[BandInfo], transform: GeoTransform,
                   dtype: str, nodata: float, meta: dict) -> bytes:
    lines = [
        f"width: {width}",
        f"height: {height}",
        f"bands: {len(bands)}",
    ]
    for i, b in enumerate(bands):
        lines.append(f"band.{i}.name: {b.name}")
        lines.append(f"band.{i}.group: {b.group}")
    gt = ", ".join(repr(v) for v in transform.to_tuple())
    lines.append(f"geotransform: {gt}")
    lines.append(f"dtype: {dtype}")
    lines.append(f"nodata: {nodata!r}")
    for k in sorted(meta):
        lines.append(f"meta.{k}: {meta[k]}")
    return ("\n".join(lines) + "\n\n").encode("utf-8")


def _parse_header(fh) -> dict:
    fields = {}
    while True:
        line = fh.readline()
        if not line:
            raise RasterFormatError("header not terminated by a blank line")
        line = line.decode("utf-8")
        if line.strip() == "":
            break
        if ":" not in line:
            raise RasterFormatError(f"malformed header line: {line.rstrip()!r}")
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    return fields


def save_stack(stack: CovariateStack, path) -> None:
    dtype = str(stack.data.dtype)
    if dtype not in _DTYPES:
        raise RasterFormatError(f"unsupported dtype {dtype}")
    header = _format_header(stack.width, stack.height, stack.bands, stack.transform,
                            dtype, stack.nodata, stack.meta)
    payload = np.ascontiguousarray(stack.data).astype(f"<{stack.data.dtype.kind}{stack.data.dtype.itemsize}")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_stack(path) -> CovariateStack:
    """Read a full stack from the container format.

    Raises RasterFormatError for malformed headers, band shape/count
    mismatches against the payload size, or unknown dtypes.
    """
    with open(path, "rb") as fh:
        fields = _parse_header(fh)
        try:
            width = int(fields["width"])
            height = int(fields["height"])
            n_bands = int(fields["bands"])
            dtype_name = fields["dtype"]
            nodata = float(fields["nodata"])
            transform = GeoTransform.from_tuple(fields["geotransform"].split(","))
        except KeyError as exc:
            raise RasterFormatError(f"missing header key {exc}") from None
        except ValueError as exc:
            raise RasterFormatError(str(exc)) from None
        if dtype_name not in _DTYPES:
            raise RasterFormatError(f"unknown dtype {dtype_name!r}")
        if width <= 0 or height <= 0 or n_bands <= 0:
            raise RasterFormatError("non-positive raster dimensions")
        bands = []
        for i in range(n_bands):
            try:
                bands.append(BandInfo(fields[f"band.{i}.name"], fields[f"band.{i}.group"]))
            except KeyError as exc:
                raise RasterFormatError(f"missing header key {exc}") from None
        meta = {k[len("meta."):]: v for k, v in fields.items() if k.startswith("meta.")}
        dtype = np.dtype(_DTYPES[dtype_name]).newbyteorder("<")
        raw = fh.read()
        expected = width * height * n_bands * dtype.itemsize
        if len(raw) != expected:
            raise RasterFormatError(
                f"payload has {len(raw)} bytes, expected {expected} "
                f"({n_bands} bands of {height}x{width})"
            )
        data = np.frombuffer(raw, dtype=dtype).reshape(n_bands, height, width)
        data = data.astype(_DTYPES[dtype_name])  # native byte order, writable copy
    return CovariateStack(data=data, bands=bands, transform=transform,
                          nodata=nodata, meta=meta)


class StackFile:
    """Windowed reader over a container file; does not load the payload.

    Safe for concurrent use from multiple readers (each call seeks on its
    own handle offset arithmetic within a lock-free read).
    """

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            fields = _parse_header(fh)
            self._data_offset = fh.tell()
        self.width = int(fields["width"])
        self.height = int(fields["height"])
        self.n_bands = int(fields["bands"])
        dtype_name = fields["dtype"]
        if dtype_name not in _DTYPES:
            raise RasterFormatError(f"unknown dtype {dtype_name!r}")
        self.dtype = np.dtype(_DTYPES[dtype_name])
        self.nodata = float(fields["nodata"])
        self.transform = GeoTransform.from_tuple(fields["geotransform"].split(","))
        self.bands = [BandInfo(fields[f"band.{i}.name"], fields[f"band.{i}.group"])
                      for i in range(self.n_bands)]

    def read_window(self, band: int, row0: int, col0: int, h: int, w: int) -> np.ndarray:
        """Read an in-bounds window of one band without loading the rest."""
        if not (0 <= band < self.n_bands):
            raise IndexError(f"band {band} out of range")
        if row0 < 0 or col0 < 0 or row0 + h > self.height or col0 + w > self.width:
            raise IndexError("window exceeds raster bounds")
        item = self.dtype.itemsize
        out = np.empty((h, w), dtype=self.dtype)
        with open(self.path, "rb") as fh:
            band_base = self._data_offset + band * self.height * self.width * item
            for r in range(h):
                fh.seek(band_base + ((row0 + r) * self.width + col0) * item)
                out[r] = np.frombuffer(fh.read(w * item), dtype=self.dtype.newbyteorder("<"))
        return out


# ---------------------------------------------------------------------------
# Tiles


@dataclass
class Tile:
    """A square crop of the stack, nodata-imputed and edge-padded.

    ``pixels`` is (channels, size, size) float32 in stack band order.
    ``valid`` flags which pixels held real data before imputation.
    """

    pixels: np.ndarray
    valid: np.ndarray
    transform: GeoTransform
    band_names: list[str]

    @property
    def size(self) -> int:
        return self.pixels.shape[1]


def crop_tile(stack: CovariateStack, center: tuple[float, float], size: int,
              band_means: np.ndarray | None = None) -> Tile:
    """Crop a size x size tile around a planar center point.

    The window is centered on the pixel containing ``center`` (that pixel
    lands at index size // 2). Out-of-bounds pixels replicate the nearest
    edge; nodata pixels are filled with the per-band mean of valid pixels
    and flagged False in the validity mask.
    """
    x, y = center
    if not stack.contains(x, y):
        raise ValueError(f"center {center} outside stack extent {stack.bounds()}")
    if size < 1:
        raise ValueError("size must be >= 1")
    col_c, row_c = stack.transform.containing_pixel(x, y)
    col_c = min(max(col_c, 0), stack.width - 1)
    row_c = min(max(row_c, 0), stack.height - 1)
    col0 = col_c - size // 2
    row0 = row_c - size // 2

    cols = np.clip(np.arange(col0, col0 + size), 0, stack.width - 1)
    rows = np.clip(np.arange(row0, row0 + size), 0, stack.height - 1)
    pixels = stack.data[:, rows[:, None], cols[None, :]].astype(np.float32)
    valid = np.isfinite(pixels) & (pixels != stack.nodata)
    if not valid.all():
        if band_means is None:
            band_means = stack.band_means()
        fill = np.broadcast_to(
            np.asarray(band_means, dtype=np.float32)[:, None, None], pixels.shape)
        pixels = np.where(valid, pixels, fill)
    return Tile(
        pixels=pixels,
        valid=valid,
        transform=stack.transform.window_transform(col0, row0),
        band_names=stack.band_names,
    )


# ---------------------------------------------------------------------------
# Resampling


def upsample_band(grid: np.ndarray, src_res: float, dst_res: float) -> np.ndarray:
    """Bilinearly resample a 2-D grid from src_res to dst_res meters/pixel.

    Both grids describe the same ground extent; samples live at pixel
    centers and queries outside the source center hull clamp to the edge,
    so a constant field stays constant and linear ramps are reproduced
    exactly on the interior.
    """
    if src_res <= 0 or dst_res <= 0:
        raise ValueError("resolutions must be positive")
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    scale = src_res / dst_res
    out_h = max(1, int(round(h * scale)))
    out_w = max(1, int(round(w * scale)))

    # Output center j maps to source coordinate (j + 0.5)/scale - 0.5.
    src_c = np.clip((np.arange(out_w) + 0.5) / scale - 0.5, 0, w - 1)
    src_r = np.clip((np.arange(out_h) + 0.5) / scale - 0.5, 0, h - 1)
    c0 = np.floor(src_c).astype(int)
    r0 = np.floor(src_r).astype(int)
    c1 = np.minimum(c0 + 1, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    fc = src_c - c0
    fr = src_r - r0

    top = grid[r0[:, None], c0[None, :]] * (1 - fc)[None, :] + grid[r0[:, None], c1[None, :]] * fc[None, :]
    bot = grid[r1[:, None], c0[None, :]] * (1 - fc)[None, :] + grid[r1[:, None], c1[None, :]] * fc[None, :]
    return top * (1 - fr)[:, None] + bot * fr[:, None]
