"""Hierarchical windowed-attention tile encoder.

Four stages of window / shifted-window self-attention with patch merging
between stages, so a (C, H, W) tile becomes feature maps at strides
4/8/16/32 with channel widths d, 2d, 4d, 8d. Window size is clamped to
the stage resolution (small desk tiles reach 2x2 maps at stage four).

A diagnostic mode replaces every attention map with the identity, which
collapses the network to per-patch linear maps; tests use it to verify
stage-one locality.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

N_STAGES = 4


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    base_dim: int = 32
    window: int = 4
    depths: tuple = (2, 2, 2, 2)
    heads: tuple = (2, 4, 8, 16)
    tile: int = 64
    mlp_ratio: float = 4.0

    def __post_init__(self):
        if self.base_dim < 8:
            raise ValueError("base_dim must be >= 8")
        if self.tile % 32 != 0:
            raise ValueError(f"tile size must be divisible by 32, got {self.tile}")
        if len(self.depths) != N_STAGES or len(self.heads) != N_STAGES:
            raise ValueError("need depths and heads for exactly 4 stages")
        for i in range(N_STAGES):
            res = self.stage_resolution(i)
            win = self.stage_window(i)
            if res % win != 0:
                raise ValueError(
                    f"stage {i}: resolution {res} not tiled by window {win}")
            if self.stage_dim(i) % self.heads[i] != 0:
                raise ValueError(f"stage {i}: dim not divisible by heads")

    def stage_resolution(self, i: int) -> int:
        return self.tile // (4 * 2 ** i)

    def stage_dim(self, i: int) -> int:
        return self.base_dim * 2 ** i

    def stage_window(self, i: int) -> int:
        return min(self.window, self.stage_resolution(i))

    @property
    def stage_dims(self) -> tuple:
        return tuple(self.stage_dim(i) for i in range(N_STAGES))


@dataclass
class FeaturePyramid:
    """Stage feature maps, each (B, C_i, H_i, W_i)."""

    stages: tuple

    def __iter__(self):
        return iter(self.stages)

    def __getitem__(self, i):
        return self.stages[i]

    def detach(self) -> "FeaturePyramid":
        return FeaturePyramid(tuple(z.detach() for z in self.stages))


def window_partition(x: torch.Tensor, window: int) -> torch.Tensor:
    """(B, H, W, C) -> (num_windows*B, window*window, C)."""
    B, H, W, C = x.shape
    x = x.view(B, H // window, window, W // window, window, C)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(-1, window * window, C)


def window_reverse(windows: torch.Tensor, window: int, H: int, W: int) -> torch.Tensor:
    """Inverse of window_partition back to (B, H, W, C)."""
    B = windows.shape[0] // (H * W // window // window)
    x = windows.view(B, H // window, W // window, window, window, -1)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(B, H, W, -1)


class WindowAttention(nn.Module):
    """Multi-head self-attention within one window, with relative bias."""

    def __init__(self, dim, window, num_heads):
        super().__init__()
        self.dim = dim
        self.window = window
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5

        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim)
        self.relative_position_bias_table = nn.Parameter(
            torch.zeros((2 * window - 1) ** 2, num_heads))

        coords = torch.stack(torch.meshgrid(
            torch.arange(window), torch.arange(window), indexing="ij"))
        flat = coords.flatten(1)
        rel = flat[:, :, None] - flat[:, None, :]
        rel = rel.permute(1, 2, 0).contiguous()
        rel[:, :, 0] += window - 1
        rel[:, :, 1] += window - 1
        rel[:, :, 0] *= 2 * window - 1
        # derived from the window size; rebuilt on construction
        self.register_buffer("relative_position_index", rel.sum(-1), persistent=False)

    def forward(self, x, mask=None, identity_attention=False):
        B, N, C = x.shape
        qkv = self.qkv(x).reshape(B, N, 3, self.num_heads, C // self.num_heads)
        qkv = qkv.permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]

        if identity_attention:
            out = v
        else:
            attn = (q * self.scale) @ k.transpose(-2, -1)
            bias = self.relative_position_bias_table[
                self.relative_position_index.view(-1)].view(N, N, -1)
            attn = attn + bias.permute(2, 0, 1).unsqueeze(0)
            if mask is not None:
                nW = mask.shape[0]
                attn = attn.view(B // nW, nW, self.num_heads, N, N) \
                    + mask.unsqueeze(1).unsqueeze(0)
                attn = attn.view(-1, self.num_heads, N, N)
            attn = attn.softmax(dim=-1)
            out = attn @ v

        out = out.transpose(1, 2).reshape(B, N, C)
        return self.proj(out)


class TransformerBlock(nn.Module):
    def __init__(self, dim, resolution, window, num_heads, shift, mlp_ratio):
        super().__init__()
        self.resolution = resolution
        self.window = window
        self.shift = shift
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, window, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

        if shift > 0:
            mask = self._shift_mask(resolution, window, shift)
            self.register_buffer("attn_mask", mask, persistent=False)
        else:
            self.attn_mask = None

    @staticmethod
    def _shift_mask(resolution, window, shift):
        img = torch.zeros(1, resolution, resolution, 1)
        slices = (slice(0, -window), slice(-window, -shift), slice(-shift, None))
        cnt = 0
        for hs in slices:
            for ws in slices:
                img[:, hs, ws, :] = cnt
                cnt += 1
        win = window_partition(img, window).squeeze(-1)
        mask = win.unsqueeze(1) - win.unsqueeze(2)
        return mask.masked_fill(mask != 0, float(-100.0)).masked_fill(mask == 0, 0.0)

    def forward(self, x, identity_attention=False):
        B, H, W, C = x.shape
        shortcut = x
        x = self.norm1(x)
        if self.shift > 0:
            x = torch.roll(x, shifts=(-self.shift, -self.shift), dims=(1, 2))
        windows = window_partition(x, self.window)
        mask = None if identity_attention else self.attn_mask
        windows = self.attn(windows, mask=mask, identity_attention=identity_attention)
        x = window_reverse(windows, self.window, H, W)
        if self.shift > 0:
            x = torch.roll(x, shifts=(self.shift, self.shift), dims=(1, 2))
        x = shortcut + x
        return x + self.mlp(self.norm2(x))


class PatchMerging(nn.Module):
    """2x2 neighborhood concat + linear projection: halves H,W, doubles C."""

    def __init__(self, dim):
        super().__init__()
        self.norm = nn.LayerNorm(4 * dim)
        self.reduction = nn.Linear(4 * dim, 2 * dim, bias=False)

    def forward(self, x):
        x = torch.cat([x[:, 0::2, 0::2], x[:, 1::2, 0::2],
                       x[:, 0::2, 1::2], x[:, 1::2, 1::2]], dim=-1)
        return self.reduction(self.norm(x))


class TileEncoder(nn.Module):
    """Tile (B, C, H, W) -> FeaturePyramid at strides 4/8/16/32."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        d = config.base_dim
        self.patch_embed = nn.Conv2d(config.in_channels, d, kernel_size=4, stride=4)
        self.embed_norm = nn.LayerNorm(d)

        self.stages = nn.ModuleList()
        self.merges = nn.ModuleList()
        for i in range(N_STAGES):
            dim = config.stage_dim(i)
            res = config.stage_resolution(i)
            win = config.stage_window(i)
            blocks = []
            for b in range(config.depths[i]):
                shift = 0 if (b % 2 == 0 or win >= res) else win // 2
                blocks.append(TransformerBlock(
                    dim, res, win, config.heads[i], shift, config.mlp_ratio))
            self.stages.append(nn.ModuleList(blocks))
            if i < N_STAGES - 1:
                self.merges.append(PatchMerging(dim))
        self.apply(_init_weights)

    def forward(self, tile: torch.Tensor, identity_attention: bool = False) -> FeaturePyramid:
        if tile.ndim != 4 or tile.shape[1] != self.config.in_channels:
            raise ValueError(
                f"expected (B, {self.config.in_channels}, H, W) input, got {tuple(tile.shape)}")
        if not torch.isfinite(tile).all():
            raise ValueError("non-finite values in encoder input")
        x = self.patch_embed(tile).permute(0, 2, 3, 1)
        x = self.embed_norm(x)
        outputs = []
        for i in range(N_STAGES):
            for block in self.stages[i]:
                x = block(x, identity_attention=identity_attention)
            outputs.append(x.permute(0, 3, 1, 2))
            if i < N_STAGES - 1:
                x = self.merges[i](x)
        return FeaturePyramid(tuple(outputs))


def _init_weights(module):
    if isinstance(module, (nn.Linear, nn.Conv2d)):
        nn.init.trunc_normal_(module.weight, std=0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


# ---------------------------------------------------------------------------
# Gradient diagnostics


class _ProbeHead(nn.Module):
    """Linear probe whose loss is 0.5 * mean(out^2), so zero weights give
    zero gradients on the head itself."""

    def __init__(self, in_dim):
        super().__init__()
        self.linear = nn.Linear(in_dim, 1)

    def forward(self, pyramid: FeaturePyramid):
        pooled = torch.cat([z.mean(dim=(2, 3)) for z in pyramid], dim=1)
        out = self.linear(pooled)
        return 0.5 * (out ** 2).mean()


def encoder_backward_check(config: EncoderConfig | None = None, seed: int = 0,
                           step: float = 1e-3, samples_per_tensor: int = 4) -> float:
    """Max relative error between autograd and central finite differences.

    Runs a tiny float64 encoder plus probe head; a handful of entries per
    parameter tensor is perturbed (seeded), which keeps the check under a
    second while touching every tensor.
    """
    if config is None:
        config = EncoderConfig(in_channels=2, base_dim=8, window=2,
                               depths=(1, 1, 1, 1), heads=(1, 2, 2, 4), tile=32)
    torch.manual_seed(seed)
    encoder = TileEncoder(config).double()
    probe = _ProbeHead(sum(config.stage_dims)).double()
    tile = torch.randn(1, config.in_channels, config.tile, config.tile, dtype=torch.float64)

    def loss_fn():
        return probe(encoder(tile))

    loss = loss_fn()
    params = list(encoder.parameters()) + list(probe.parameters())
    grads = torch.autograd.grad(loss, params)

    rng = torch.Generator().manual_seed(seed)
    max_rel = 0.0
    with torch.no_grad():
        for p, g in zip(params, grads):
            flat = p.view(-1)
            n = flat.numel()
            idx = torch.randperm(n, generator=rng)[:min(samples_per_tensor, n)]
            for i in idx.tolist():
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss_fn().item()
                flat[i] = orig - step
                down = loss_fn().item()
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                analytic = g.view(-1)[i].item()
                denom = max(abs(numeric), abs(analytic), 1e-6)
                max_rel = max(max_rel, abs(numeric - analytic) / denom)
    return max_rel
