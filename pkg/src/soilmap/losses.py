"""Training objectives: contrastive alignment and supervised task losses."""

from __future__ import annotations

import torch
import torch.nn.functional as F

DEFAULT_TEMPERATURE = 0.07


def info_nce(anchors: torch.Tensor, positives: torch.Tensor,
             temperature: float = DEFAULT_TEMPERATURE,
             symmetric: bool = True) -> torch.Tensor:
    """Temperature-scaled cosine-similarity contrastive loss.

    Row i of ``positives`` is the positive for row i of ``anchors``; every
    other row in the batch is a negative. The symmetric variant averages
    the anchor->positive and positive->anchor directions.
    """
    if anchors.ndim != 2 or anchors.shape != positives.shape:
        raise ValueError("anchors and positives must be matching (N, D) matrices")
    n = anchors.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs at least 2 in-batch locations")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    eps = torch.finfo(anchors.dtype).tiny
    a_norm = anchors.norm(dim=1)
    p_norm = positives.norm(dim=1)
    if (a_norm <= eps).any() or (p_norm <= eps).any():
        raise ValueError("zero-norm embedding row")

    a = anchors / a_norm[:, None]
    p = positives / p_norm[:, None]
    logits = (a @ p.T) / temperature
    targets = torch.arange(n, device=anchors.device)
    loss = F.cross_entropy(logits, targets)
    if symmetric:
        loss = 0.5 * (loss + F.cross_entropy(logits.T, targets))
    return loss


def multimodal_alignment_loss(g_sat, g_cov, temperature=DEFAULT_TEMPERATURE):
    """Pull the two modality embeddings of one location together."""
    return info_nce(g_sat, g_cov, temperature)


def geo_alignment_loss(g_fused, g_geo, temperature=DEFAULT_TEMPERATURE):
    """Pull the fused visual embedding toward the location's geo embedding."""
    return info_nce(g_fused, g_geo, temperature)


def nsp_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy on sigmoid(logit)."""
    logits = logits.reshape(-1)
    labels = labels.reshape(-1)
    if not torch.isfinite(logits).all():
        raise ValueError("non-finite logits")
    if not ((labels == 0) | (labels == 1)).all():
        raise ValueError("presence labels must be 0 or 1")
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype))


def taxonomy_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean categorical cross-entropy over softmax."""
    if logits.ndim != 2:
        raise ValueError("taxonomy logits must be (N, K)")
    if not torch.isfinite(logits).all():
        raise ValueError("non-finite logits")
    k = logits.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels out of range 0..{k - 1}")
    return F.cross_entropy(logits, labels.long())
