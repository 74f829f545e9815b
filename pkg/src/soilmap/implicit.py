"""Continuous-coordinate embeddings from discrete feature maps.

A query point inside a tile is decoded against each stage of a feature
pyramid: the four surrounding feature vectors pass through a per-stage
MLP together with the query's offset from each feature center, and the
four results are blended with weights proportional to the area of the
rectangle spanned by the query and the *diagonally opposite* center.
Nearer features therefore contribute more, the weights sum to one, and
with the MLP replaced by the identity the blend reduces to bilinear
interpolation.

Tile-local coordinates live in [-1, 1]^2 with x along columns and y along
rows (y = -1 at the top row). Feature centers for an h x w map sit at
(-1 + (2j+1)/w, -1 + (2i+1)/h); maps are edge-padded by one cell so every
in-tile query has four neighbors.

The module also houses the Fourier positional encoding of planar
coordinates and the coordinate encoder that turns it into a geo
embedding of the shared dimension.
"""

from __future__ import annotations

import warnings

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoder import FeaturePyramid, _init_weights

_COORD_TOL = 1e-9


class StageQueryMLP(nn.Module):
    """Per-stage decoder f(z_t, offset) -> shared dimension.

    Two ReLU hidden layers at the stage channel width; offsets arrive in
    cell units (neighboring centers are one unit apart).
    """

    def __init__(self, stage_dim: int, out_dim: int):
        super().__init__()
        self.stage_dim = stage_dim
        self.out_dim = out_dim
        self.net = nn.Sequential(
            nn.Linear(stage_dim + 2, stage_dim), nn.ReLU(),
            nn.Linear(stage_dim, stage_dim), nn.ReLU(),
            nn.Linear(stage_dim, out_dim),
        )
        self.apply(_init_weights)

    def forward(self, z, offset):
        return self.net(torch.cat([z, offset], dim=-1))


def implicit_query(feat: torch.Tensor, coords: torch.Tensor,
                   mlp: StageQueryMLP | None = None,
                   identity_features: bool = False) -> torch.Tensor:
    """Area-weighted MLP decoding of one feature map at continuous points.

    Parameters
    ----------
    feat:
        (B, C, h, w) stage feature map.
    coords:
        (B, N, 2) tile-local (x, y) in [-1, 1].
    mlp:
        Stage decoder; required unless ``identity_features``.
    identity_features:
        Skip the MLP and blend the raw feature vectors, which makes the
        result exactly bilinear interpolation (used by oracle tests).

    Returns (B, N, D) embeddings (D = C when identity_features).
    """
    if feat.ndim != 4:
        raise ValueError(f"feat must be (B, C, h, w), got {tuple(feat.shape)}")
    if coords.ndim != 3 or coords.shape[-1] != 2:
        raise ValueError(f"coords must be (B, N, 2), got {tuple(coords.shape)}")
    if not torch.isfinite(feat).all():
        raise ValueError("non-finite feature map")
    if coords.abs().max() > 1 + _COORD_TOL:
        raise ValueError("query coordinates outside the tile (expected [-1, 1])")
    if mlp is None and not identity_features:
        raise ValueError("mlp required unless identity_features=True")

    B, C, h, w = feat.shape
    N = coords.shape[1]
    padded = F.pad(feat, (1, 1, 1, 1), mode="replicate")

    u = coords[..., 0]
    v = coords[..., 1]
    j0 = torch.floor((u + 1) * w / 2 - 0.5)
    i0 = torch.floor((v + 1) * h / 2 - 0.5)

    bidx = torch.arange(B, device=feat.device)[:, None].expand(B, N)
    outputs = []
    areas = []
    for di in (0, 1):
        for dj in (0, 1):
            jj = j0 + dj
            ii = i0 + di
            center_x = (2 * jj + 1) / w - 1
            center_y = (2 * ii + 1) / h - 1
            gj = (jj + 1).long().clamp(0, w + 1)
            gi = (ii + 1).long().clamp(0, h + 1)
            z = padded[bidx, :, gi, gj]  # (B, N, C)
            rel_x = u - center_x
            rel_y = v - center_y
            areas.append(rel_x.abs() * rel_y.abs())
            if identity_features:
                outputs.append(z)
            else:
                offset = torch.stack([rel_x * (w / 2), rel_y * (h / 2)], dim=-1)
                outputs.append(mlp(z, offset.to(z.dtype)))

    total = areas[0] + areas[1] + areas[2] + areas[3]
    # nearer neighbors get the area of the opposite corner's rectangle
    weights = (areas[3], areas[2], areas[1], areas[0])
    result = 0
    for out, wt in zip(outputs, weights):
        result = result + out * (wt / total).unsqueeze(-1).to(out.dtype)
    return result


def implicit_weights(grid_shape: tuple, coords: torch.Tensor) -> torch.Tensor:
    """Just the four blend weights for (h, w) and coords (N, 2); rows sum to 1."""
    h, w = grid_shape
    u, v = coords[:, 0], coords[:, 1]
    j0 = torch.floor((u + 1) * w / 2 - 0.5)
    i0 = torch.floor((v + 1) * h / 2 - 0.5)
    areas = []
    for di in (0, 1):
        for dj in (0, 1):
            center_x = (2 * (j0 + dj) + 1) / w - 1
            center_y = (2 * (i0 + di) + 1) / h - 1
            areas.append((u - center_x).abs() * (v - center_y).abs())
    total = areas[0] + areas[1] + areas[2] + areas[3]
    return torch.stack([areas[3], areas[2], areas[1], areas[0]], dim=-1) / total.unsqueeze(-1)


def multiscale_query(pyramid: FeaturePyramid, coords: torch.Tensor,
                     mlps: nn.ModuleList, aggregation: str = "sum") -> torch.Tensor:
    """Aggregate per-stage implicit queries into one embedding per point."""
    if len(mlps) != len(pyramid.stages):
        raise ValueError("one decoder per pyramid stage required")
    parts = [implicit_query(z, coords, mlp) for z, mlp in zip(pyramid, mlps)]
    stacked = torch.stack(parts)
    if aggregation == "sum":
        return stacked.sum(dim=0)
    if aggregation == "mean":
        return stacked.mean(dim=0)
    raise ValueError(f"unknown aggregation {aggregation!r}")


# ---------------------------------------------------------------------------
# Geo embedding


def positional_encode(coords: torch.Tensor, n_frequencies: int) -> torch.Tensor:
    """Fourier features of normalized 2-D coordinates.

    Layout for (lam, phi) and k = 0..L-1::

        [lam, phi, sin(2^k pi lam), cos(2^k pi lam),
                   sin(2^k pi phi), cos(2^k pi phi)]

    giving 2 + 4L values; entries beyond the first two lie in [-1, 1].
    """
    if coords.shape[-1] != 2:
        raise ValueError("coords must end in (lam, phi) pairs")
    lam = coords[..., 0:1]
    phi = coords[..., 1:2]
    parts = [lam, phi]
    for k in range(n_frequencies):
        freq = (2.0 ** k) * torch.pi
        parts.extend([torch.sin(freq * lam), torch.cos(freq * lam),
                      torch.sin(freq * phi), torch.cos(freq * phi)])
    return torch.cat(parts, dim=-1)


class GeoEncoder(nn.Module):
    """Three fully connected layers over the positional encoding.

    Planar coordinates are normalized to [-1, 1] by the study bounding box
    (stored with the module so checkpoints carry it); out-of-box queries
    clamp with a warning.
    """

    def __init__(self, bbox: tuple, out_dim: int, n_frequencies: int = 10):
        super().__init__()
        xmin, ymin, xmax, ymax = (float(b) for b in bbox)
        if xmax <= xmin or ymax <= ymin:
            raise ValueError(f"degenerate bounding box {bbox}")
        self.n_frequencies = n_frequencies
        self.out_dim = out_dim
        self.register_buffer("bbox", torch.tensor([xmin, ymin, xmax, ymax]))
        in_dim = 2 + 4 * n_frequencies
        self.net = nn.Sequential(
            nn.Linear(in_dim, out_dim), nn.ReLU(),
            nn.Linear(out_dim, out_dim), nn.ReLU(),
            nn.Linear(out_dim, out_dim),
        )
        self.apply(_init_weights)

    def normalize(self, planar: torch.Tensor) -> torch.Tensor:
        xmin, ymin, xmax, ymax = self.bbox.tolist()
        lam = 2 * (planar[..., 0] - xmin) / (xmax - xmin) - 1
        phi = 2 * (planar[..., 1] - ymin) / (ymax - ymin) - 1
        out = torch.stack([lam, phi], dim=-1)
        if out.abs().max() > 1 + 1e-6:
            warnings.warn("coordinates outside the study bounding box; clamping",
                          stacklevel=2)
        return out.clamp(-1.0, 1.0)

    def forward(self, planar: torch.Tensor) -> torch.Tensor:
        pe = positional_encode(self.normalize(planar.to(self.bbox.dtype)), self.n_frequencies)
        return self.net(pe)


def fuse(g_sat: torch.Tensor, g_cov: torch.Tensor) -> torch.Tensor:
    """Elementwise sum of the two modality embeddings."""
    if g_sat.shape != g_cov.shape:
        raise ValueError(f"dim mismatch: {tuple(g_sat.shape)} vs {tuple(g_cov.shape)}")
    return g_sat + g_cov
