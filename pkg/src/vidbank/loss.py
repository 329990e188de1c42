"""Dense spatio-temporal contrastive objective.

Predicted and observed feature maps are flattened over (batch, step, height,
width); the similarity matrix between all row pairs feeds a softmax
cross-entropy whose positive is the diagonal — the spatio-temporally aligned
pair from the same clip. Everything off-diagonal is a negative, including
other positions and steps of the same clip.

`contrastive_loss_oracle` recomputes the loss with explicit per-anchor
loops and no vectorized shortcuts; it is the ground truth the fast path is
tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DegenerateBatch, ZeroVector


@dataclass(frozen=True)
class LossReport:
    loss: float
    top1_accuracy: float
    num_candidates: int


def _flatten_rows(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x
    if x.dim() != 5:
        raise DegenerateBatch(
            f"expected [B, S, C, H, W] or [N, C], got {tuple(x.shape)}")
    # [B, S, C, H, W] -> [B*S*H*W, C]
    return x.permute(0, 1, 3, 4, 2).reshape(-1, x.shape[2])


def _normalize_rows(rows: torch.Tensor) -> torch.Tensor:
    norms = torch.linalg.vector_norm(rows, dim=1, keepdim=True)
    if (norms == 0).any():
        raise ZeroVector("cannot L2-normalize a zero feature row")
    return rows / norms


def dense_contrastive_loss(predicted: torch.Tensor, target: torch.Tensor,
                           normalized: bool = False):
    """Returns (differentiable loss, LossReport).

    Ties at the top score count as incorrect for top-1 accuracy.
    """
    if predicted.shape != target.shape:
        raise DegenerateBatch(
            f"predicted {tuple(predicted.shape)} != target {tuple(target.shape)}")
    pred_rows = _flatten_rows(predicted)
    tgt_rows = _flatten_rows(target)
    n = pred_rows.shape[0]
    if n < 2:
        raise DegenerateBatch(f"need at least 2 candidates, got {n}")
    if normalized:
        pred_rows = _normalize_rows(pred_rows)
        tgt_rows = _normalize_rows(tgt_rows)
    similarity = pred_rows @ tgt_rows.T
    labels = torch.arange(n, device=similarity.device)
    loss = F.cross_entropy(similarity, labels)

    with torch.no_grad():
        diag = similarity.diagonal()
        off = similarity.clone()
        off.fill_diagonal_(float("-inf"))
        correct = diag > off.max(dim=1).values
        top1 = correct.double().mean().item()
    return loss, LossReport(loss=loss.item(), top1_accuracy=top1, num_candidates=n)


def contrastive_loss_oracle(predicted: np.ndarray, target: np.ndarray,
                            normalized: bool = False) -> float:
    """Term-by-term reference: explicit loops over anchors and candidates."""
    pred_rows = _flatten_rows_np(predicted)
    tgt_rows = _flatten_rows_np(target)
    n = len(pred_rows)
    if n < 2:
        raise DegenerateBatch(f"need at least 2 candidates, got {n}")
    if n > 256:
        raise DegenerateBatch("oracle is for small instances (<= 256 candidates)")
    if normalized:
        pred_rows = [r / math.sqrt(sum(v * v for v in r)) for r in pred_rows]
        tgt_rows = [r / math.sqrt(sum(v * v for v in r)) for r in tgt_rows]

    total = 0.0
    for i in range(n):
        scores = []
        for j in range(n):
            s = 0.0
            for c in range(len(pred_rows[i])):
                s += pred_rows[i][c] * tgt_rows[j][c]
            scores.append(s)
        m = max(scores)
        denom = 0.0
        for s in scores:
            denom += math.exp(s - m)
        # -log softmax of the aligned pair
        total += -(scores[i] - m - math.log(denom))
    return total / n


def _flatten_rows_np(x: np.ndarray) -> list[list[float]]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return [list(row) for row in x]
    if x.ndim != 5:
        raise DegenerateBatch(f"expected [B, S, C, H, W] or [N, C], got {x.shape}")
    rows = []
    b, s, c, h, w = x.shape
    for bi in range(b):
        for si in range(s):
            for hi in range(h):
                for wi in range(w):
                    rows.append([float(x[bi, si, ci, hi, wi]) for ci in range(c)])
    return rows


def combine_bidirectional(loss_forward: float | torch.Tensor,
                          loss_backward: float | torch.Tensor):
    """Arithmetic mean of the per-direction losses."""
    for value in (loss_forward, loss_backward):
        v = float(value)
        if not math.isfinite(v) or v < 0:
            raise DegenerateBatch(f"direction loss must be finite and >= 0, got {v}")
    return (loss_forward + loss_backward) / 2
