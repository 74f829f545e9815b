"""Shared oracles and checking utilities for the test suite."""

from __future__ import annotations

import math

import numpy as np
import torch


def bilinear_at(grid: np.ndarray, u: float, v: float) -> float:
    """Scalar clamped-center bilinear interpolation on tile coords in [-1, 1].

    Independent of the package implementation: plain floor/fraction
    arithmetic on one grid value at a time. Centers sit at
    -1 + (2j + 1)/w; queries beyond the outer centers clamp to the edge.
    """
    h, w = grid.shape
    jf = (u + 1) * w / 2 - 0.5
    if_ = (v + 1) * h / 2 - 0.5
    jf = min(max(jf, 0.0), w - 1.0)
    if_ = min(max(if_, 0.0), h - 1.0)
    j0 = int(math.floor(jf))
    i0 = int(math.floor(if_))
    j0 = min(j0, w - 1)
    i0 = min(i0, h - 1)
    j1 = min(j0 + 1, w - 1)
    i1 = min(i0 + 1, h - 1)
    fu = jf - j0
    fv = if_ - i0
    return float(
        grid[i0, j0] * (1 - fu) * (1 - fv)
        + grid[i0, j1] * fu * (1 - fv)
        + grid[i1, j0] * (1 - fu) * fv
        + grid[i1, j1] * fu * fv
    )


def fd_gradient_max_rel_error(loss_fn, tensors, step=1e-5, floor=1e-6,
                              max_entries=None, seed=0):
    """Central finite differences vs autograd over float64 leaf tensors.

    loss_fn takes no arguments and must read the given tensors. Checks
    every entry unless max_entries caps the per-tensor count (seeded
    subsample). Returns the max relative error.
    """
    tensors = list(tensors)
    for t in tensors:
        assert t.dtype == torch.float64, "finite differences need float64"
        t.requires_grad_(True)
        if t.grad is not None:
            t.grad = None
    loss = loss_fn()
    grads = torch.autograd.grad(loss, tensors, allow_unused=False)

    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, grads):
            flat = t.view(-1)
            idx = np.arange(flat.numel())
            if max_entries is not None and len(idx) > max_entries:
                idx = rng.choice(idx, size=max_entries, replace=False)
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss_fn().item()
                flat[i] = orig - step
                down = loss_fn().item()
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                analytic = g.view(-1)[int(i)].item()
                denom = max(abs(numeric), abs(analytic), floor)
                worst = max(worst, abs(numeric - analytic) / denom)
    for t in tensors:
        t.requires_grad_(False)
    return worst


def brute_force_clusters(points: np.ndarray, eps: float) -> np.ndarray:
    """O(n^2) union-find over the full pairwise distance matrix."""
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    for i in range(n):
        for j in range(i + 1, n):
            if d2[i, j] <= eps * eps:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    roots = [find(i) for i in range(n)]
    canon = {}
    out = np.empty(n, dtype=np.int64)
    for k, r in enumerate(roots):
        out[k] = canon.setdefault(r, len(canon))
    return out


def confusion_counts(labels, preds, k):
    """Tiny independent confusion-matrix builder."""
    m = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(labels, preds):
        m[int(t), int(p)] += 1
    return m
