"""Point field observations and region partitions.

Observations travel as CSV with header ``x,y,nsp,tax,date,source``; an
empty field means the label is absent. Region partitions pair a
``region_id,name`` CSV with a single-band int32 raster in the container
format.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geo import GeoTransform
from .raster import BandInfo, CovariateStack, load_stack, save_stack

SOIL_ORDERS = (
    "Andisols",
    "Entisols",
    "Gelisols",
    "Histosols",
    "Inceptisols",
    "Mollisols",
    "Spodosols",
)

UNASSIGNED_REGION = -1


@dataclass
class FieldObservation:
    """One surveyed point: planar coordinates plus optional task labels."""

    x: float
    y: float
    nsp_label: int | None = None
    tax_label: int | None = None
    date: str = ""
    source: str = ""

    def __post_init__(self):
        if self.nsp_label is None and self.tax_label is None:
            raise ValueError("observation needs at least one of nsp_label/tax_label")
        if self.nsp_label is not None and self.nsp_label not in (0, 1):
            raise ValueError(f"nsp_label must be 0 or 1, got {self.nsp_label}")
        if self.tax_label is not None and not 0 <= self.tax_label < len(SOIL_ORDERS):
            raise ValueError(f"tax_label must be in 0..6, got {self.tax_label}")


def observation_xy(observations) -> np.ndarray:
    """(n, 2) float64 array of planar coordinates."""
    return np.array([[o.x, o.y] for o in observations], dtype=np.float64)


def save_observations(observations, path, header_comment: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "nsp", "tax", "date", "source"])
        for o in observations:
            writer.writerow([
                repr(o.x),
                repr(o.y),
                "" if o.nsp_label is None else o.nsp_label,
                "" if o.tax_label is None else SOIL_ORDERS[o.tax_label],
                o.date,
                o.source,
            ])


def load_observations(path) -> list[FieldObservation]:
    observations = []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(rows)
        for i, row in enumerate(reader):
            try:
                tax = row["tax"].strip()
                observations.append(FieldObservation(
                    x=float(row["x"]),
                    y=float(row["y"]),
                    nsp_label=int(row["nsp"]) if row["nsp"].strip() else None,
                    tax_label=SOIL_ORDERS.index(tax) if tax else None,
                    date=row["date"],
                    source=row["source"],
                ))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"bad observation row {i}: {exc}") from None
    return observations


class RegionPartition:
    """Assigns every planar point to one region id (or UNASSIGNED_REGION).

    Backed by an int32 label raster; points outside the raster extent map
    to the unassigned id.
    """

    def __init__(self, name: str, labels: np.ndarray, transform: GeoTransform,
                 region_names: dict[int, str]):
        self.name = name
        self.labels = np.asarray(labels, dtype=np.int32)
        self.transform = transform
        self.region_names = dict(region_names)

    @property
    def region_ids(self) -> list[int]:
        return sorted(self.region_names)

    def region_of(self, x, y) -> np.ndarray:
        """Vectorized region lookup; returns int32 ids."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        col = np.floor((x - self.transform.origin_x) / self.transform.pixel_w).astype(int)
        row = np.floor((y - self.transform.origin_y) / self.transform.pixel_h).astype(int)
        h, w = self.labels.shape
        inside = (col >= 0) & (col < w) & (row >= 0) & (row < h)
        out = np.full(x.shape, UNASSIGNED_REGION, dtype=np.int32)
        out[inside] = self.labels[row[inside], col[inside]]
        return out

    def save(self, raster_path, csv_path) -> None:
        stack = CovariateStack(
            data=self.labels[None].astype(np.int32),
            bands=[BandInfo(self.name, "region")],
            transform=self.transform,
            nodata=float(UNASSIGNED_REGION),
        )
        save_stack(stack, raster_path)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["region_id", "name"])
            for rid in self.region_ids:
                writer.writerow([rid, self.region_names[rid]])

    @classmethod
    def load(cls, raster_path, csv_path) -> "RegionPartition":
        stack = load_stack(raster_path)
        if stack.n_bands != 1:
            raise ValueError("region raster must have exactly one band")
        names = {}
        with open(csv_path, newline="") as fh:
            for row in csv.DictReader(fh):
                names[int(row["region_id"])] = row["name"]
        return cls(stack.bands[0].name, stack.data[0].astype(np.int32),
                   stack.transform, names)
