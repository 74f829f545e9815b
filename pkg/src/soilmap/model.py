"""The assembled network: two tile encoders, per-stage implicit decoders,
a coordinate encoder, and the task heads, plus checkpoint serialization.

Checkpoints are a text header (config echo, channel statistics, band
wiring, training step, provenance) terminated by a blank line, followed
by the named parameter tensors as little-endian float32 in manifest
order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from .encoder import EncoderConfig, TileEncoder
from .implicit import GeoEncoder, StageQueryMLP, fuse, multiscale_query
from .observations import SOIL_ORDERS
from .raster import COVARIATE, SATELLITE, CovariateStack

TASK_NSP = "nsp"
TASK_TAX = "tax"

CHECKPOINT_MAGIC = "soilmap-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    sat_channels: int
    cov_channels: int
    base_dim: int = 32
    embed_dim: int = 256
    window: int = 4
    depths: tuple = (2, 2, 2, 2)
    heads: tuple = (2, 4, 8, 16)
    tile: int = 64
    mlp_ratio: float = 4.0
    n_frequencies: int = 10
    aggregation: str = "sum"

    def encoder_config(self, in_channels: int) -> EncoderConfig:
        return EncoderConfig(
            in_channels=in_channels, base_dim=self.base_dim, window=self.window,
            depths=tuple(self.depths), heads=tuple(self.heads), tile=self.tile,
            mlp_ratio=self.mlp_ratio)


def paper_model_config(sat_channels=9, cov_channels=10) -> ModelConfig:
    """Full-scale settings: 256 px tiles, width 128, shared dimension 1024."""
    return ModelConfig(sat_channels=sat_channels, cov_channels=cov_channels,
                       base_dim=128, embed_dim=1024, window=8,
                       depths=(2, 2, 6, 2), heads=(4, 8, 16, 32), tile=256)


class SoilNet(nn.Module):
    """Dual-encoder implicit model for point soil prediction."""

    def __init__(self, config: ModelConfig, bbox: tuple,
                 sat_indices, cov_indices,
                 channel_mean=None, channel_std=None):
        super().__init__()
        if len(sat_indices) != config.sat_channels or len(cov_indices) != config.cov_channels:
            raise ValueError("band wiring does not match configured channel counts")
        self.config = config
        self.sat_indices = tuple(int(i) for i in sat_indices)
        self.cov_indices = tuple(int(i) for i in cov_indices)
        n_total = len(sat_indices) + len(cov_indices)
        mean = torch.zeros(n_total) if channel_mean is None else torch.as_tensor(channel_mean, dtype=torch.float32)
        std = torch.ones(n_total) if channel_std is None else torch.as_tensor(channel_std, dtype=torch.float32)
        self.register_buffer("channel_mean", mean)
        self.register_buffer("channel_std", std.clamp_min(1e-6))

        self.sat_encoder = TileEncoder(config.encoder_config(config.sat_channels))
        self.cov_encoder = TileEncoder(config.encoder_config(config.cov_channels))
        dims = self.sat_encoder.config.stage_dims
        self.sat_queries = nn.ModuleList(
            [StageQueryMLP(d, config.embed_dim) for d in dims])
        self.cov_queries = nn.ModuleList(
            [StageQueryMLP(d, config.embed_dim) for d in dims])
        self.geo_encoder = GeoEncoder(bbox, config.embed_dim, config.n_frequencies)
        self.nsp_head = nn.Linear(config.embed_dim, 1)
        self.tax_head = nn.Linear(config.embed_dim, len(SOIL_ORDERS))

    @classmethod
    def for_stack(cls, stack: CovariateStack, config: ModelConfig | None = None,
                  **config_overrides) -> "SoilNet":
        """Wire a model to a stack: band split, z-score stats, bounding box."""
        sat_idx = stack.group_indices(SATELLITE)
        cov_idx = stack.group_indices(COVARIATE)
        if config is None:
            config = ModelConfig(sat_channels=len(sat_idx), cov_channels=len(cov_idx),
                                 **config_overrides)
        mask = stack.valid_mask()
        data = stack.data.astype(np.float64)
        counts = np.maximum(mask.sum(axis=(1, 2)), 1)
        mean = np.where(mask, data, 0).sum(axis=(1, 2)) / counts
        var = (np.where(mask, (data - mean[:, None, None]) ** 2, 0).sum(axis=(1, 2))
               / counts)
        order = list(sat_idx) + list(cov_idx)
        return cls(config, stack.bounds(), sat_idx, cov_idx,
                   channel_mean=mean[order], channel_std=np.sqrt(var)[order])

    def split_tiles(self, tiles: torch.Tensor):
        """Normalize a (B, C_total, H, W) batch and split into the two groups."""
        order = list(self.sat_indices) + list(self.cov_indices)
        x = tiles[:, order]
        x = (x - self.channel_mean[None, :, None, None]) / self.channel_std[None, :, None, None]
        n_sat = len(self.sat_indices)
        return x[:, :n_sat], x[:, n_sat:]

    def encode(self, tiles: torch.Tensor):
        sat, cov = self.split_tiles(tiles)
        return self.sat_encoder(sat), self.cov_encoder(cov)

    def location_embeddings(self, sat_pyramid, cov_pyramid, coords: torch.Tensor):
        """Per-point modality embeddings and their sum, (B, N, D) each."""
        g_sat = multiscale_query(sat_pyramid, coords, self.sat_queries,
                                 self.config.aggregation)
        g_cov = multiscale_query(cov_pyramid, coords, self.cov_queries,
                                 self.config.aggregation)
        return g_sat, g_cov, fuse(g_sat, g_cov)

    def forward(self, tiles: torch.Tensor, coords: torch.Tensor,
                planar: torch.Tensor | None = None) -> dict:
        sat_pyr, cov_pyr = self.encode(tiles)
        g_sat, g_cov, fused = self.location_embeddings(sat_pyr, cov_pyr, coords)
        out = {"g_sat": g_sat, "g_cov": g_cov, "fused": fused}
        if planar is not None:
            out["g_geo"] = self.geo_encoder(planar)
        return out

    def task_logits(self, fused: torch.Tensor, task: str) -> torch.Tensor:
        if task == TASK_NSP:
            return self.nsp_head(fused).squeeze(-1)
        if task == TASK_TAX:
            return self.tax_head(fused)
        raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Checkpoint I/O


def save_checkpoint(path, model: SoilNet, step: int = 0, meta: dict | None = None) -> None:
    state = model.state_dict()
    lines = [
        f"{CHECKPOINT_MAGIC}: {CHECKPOINT_VERSION}",
        f"config: {json.dumps(asdict(model.config))}",
        f"sat_indices: {json.dumps(list(model.sat_indices))}",
        f"cov_indices: {json.dumps(list(model.cov_indices))}",
        f"step: {step}",
    ]
    for k, v in sorted((meta or {}).items()):
        lines.append(f"meta.{k}: {v}")
    names = sorted(state)
    for name in names:
        shape = ",".join(str(s) for s in state[name].shape)
        lines.append(f"tensor: {name} {shape}")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n\n").encode("utf-8"))
        for name in names:
            arr = state[name].detach().cpu().numpy().astype("<f4")
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path) -> tuple[SoilNet, int, dict]:
    """Returns (model, step, meta). Model is in eval mode."""
    with open(path, "rb") as fh:
        header_lines = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError("checkpoint header not terminated")
            text = line.decode("utf-8").rstrip("\n")
            if text == "":
                break
            header_lines.append(text)
        fields = {}
        tensors = []
        for text in header_lines:
            key, _, value = text.partition(":")
            key, value = key.strip(), value.strip()
            if key == "tensor":
                name, _, shape = value.partition(" ")
                dims = tuple(int(s) for s in shape.split(",") if s)
                tensors.append((name, dims))
            else:
                fields[key] = value
        if fields.get(CHECKPOINT_MAGIC) != str(CHECKPOINT_VERSION):
            raise ValueError("not a recognized checkpoint file")
        cfg_dict = json.loads(fields["config"])
        cfg_dict["depths"] = tuple(cfg_dict["depths"])
        cfg_dict["heads"] = tuple(cfg_dict["heads"])
        config = ModelConfig(**cfg_dict)
        sat_idx = json.loads(fields["sat_indices"])
        cov_idx = json.loads(fields["cov_indices"])
        meta = {k[len("meta."):]: v for k, v in fields.items() if k.startswith("meta.")}
        step = int(fields.get("step", 0))

        state = {}
        for name, dims in tensors:
            count = int(np.prod(dims)) if dims else 1
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise ValueError(f"truncated tensor payload for {name}")
            state[name] = torch.from_numpy(
                np.frombuffer(raw, dtype="<f4").reshape(dims).copy())

    model = SoilNet(config, (0.0, 0.0, 1.0, 1.0), sat_idx, cov_idx)
    model.load_state_dict(state)
    model.eval()
    return model, step, meta
