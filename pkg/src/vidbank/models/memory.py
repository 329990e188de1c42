"""Compressive memory bank with predictive addressing.

A learnable [k, C] matrix of hypothesis vectors is shared across the whole
dataset. A two-layer 1x1-conv predictor maps the context feature to k
logits per spatial position; the softmax over slots is the addressing
distribution, and the predicted future feature is its expectation over the
memory rows — a convex combination, which is what lets a single prediction
cover several plausible futures at once.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..configs import MemoryConfig
from ..errors import (
    DimensionMismatch,
    NonFiniteLogits,
    TooFewBlocks,
    ZeroVector,
)
from .convgru import ConvGRUCell, aggregate_sequence


class MemoryBank(nn.Module):
    """The [k, C] matrix of compressed hypotheses, trained end-to-end."""

    def __init__(self, k: int, channels: int):
        super().__init__()
        self.k = k
        self.channels = channels
        self.M = nn.Parameter(torch.empty(k, channels))
        self.reset_parameters()

    def reset_parameters(self):
        # std 1/sqrt(C) keeps initial critic scores O(1)
        nn.init.normal_(self.M, mean=0.0, std=self.channels ** -0.5)


class FuturePredictor(nn.Module):
    """Two-layer 1x1-conv map from context channels to k slot logits."""

    def __init__(self, channels: int, k: int, hidden: int | None = None,
                 activation: str = "relu"):
        super().__init__()
        hidden = channels if hidden is None else hidden
        self.conv1 = nn.Conv2d(channels, hidden, kernel_size=1)
        self.conv2 = nn.Conv2d(hidden, k, kernel_size=1)
        self.activation = activation
        self.k = k
        self.reset_parameters()

    def reset_parameters(self):
        for conv in (self.conv1, self.conv2):
            nn.init.kaiming_normal_(conv.weight, mode="fan_in")
            nn.init.zeros_(conv.bias)

    def forward(self, context: torch.Tensor) -> torch.Tensor:
        h = self.conv1(context)
        h = torch.tanh(h) if self.activation == "tanh" else F.relu(h)
        return self.conv2(h)


def address(context: torch.Tensor, predictor: FuturePredictor,
            temperature: float = 1.0) -> torch.Tensor:
    """Distribution over memory slots at each position: [B, k, H, W]."""
    logits = predictor(context)
    if not torch.isfinite(logits).all():
        raise NonFiniteLogits("addressing logits contain NaN or Inf")
    return F.softmax(logits / temperature, dim=1)


def expect_future(p: torch.Tensor, bank: MemoryBank) -> torch.Tensor:
    """Expectation of memory rows under p: [B, k, H, W] -> [B, C, H, W]."""
    if p.shape[1] != bank.k:
        raise DimensionMismatch(
            f"distribution has {p.shape[1]} slots, bank has {bank.k}")
    return torch.einsum("bkhw,kc->bchw", p, bank.M)


def critic(a: torch.Tensor, b: torch.Tensor, normalized: bool = False) -> torch.Tensor:
    """Channel-wise dot product of two feature maps: [..., C, H, W] -> [..., H, W].

    With `normalized`, both vectors are L2-normalized per position first,
    bounding the score to [-1, 1].
    """
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if normalized:
        na = torch.linalg.vector_norm(a, dim=-3, keepdim=True)
        nb = torch.linalg.vector_norm(b, dim=-3, keepdim=True)
        if (na == 0).any() or (nb == 0).any():
            raise ZeroVector("cannot L2-normalize a zero vector")
        a = a / na
        b = b / nb
    return (a * b).sum(dim=-3)


def predict_sequence(features: list[torch.Tensor], steps: int,
                     aggregator: ConvGRUCell, predictor: FuturePredictor,
                     bank: MemoryBank, temperature: float = 1.0) -> list[torch.Tensor]:
    """Recursive multi-step prediction.

    Aggregates the observed block features into a context, then repeatedly:
    address the memory, take the expectation as the predicted feature, and
    feed that prediction through the aggregator to advance the context.
    """
    if steps == 0:
        return []
    hidden = aggregate_sequence(aggregator, features)
    predicted = []
    for _ in range(steps):
        p = address(hidden, predictor, temperature)
        z_hat = expect_future(p, bank)
        hidden = aggregator(z_hat, hidden)
        predicted.append(z_hat)
    return predicted


def bidirectional_predict(features: list[torch.Tensor], steps: int,
                          forward_agg: ConvGRUCell, backward_agg: ConvGRUCell,
                          predictor: FuturePredictor, bank: MemoryBank,
                          temperature: float = 1.0):
    """Predict the last `steps` blocks forward and the first `steps` backward.

    The two aggregators are separate; the predictor and the memory bank are
    shared. Returns ((fwd_pred, fwd_target), (bwd_pred, bwd_target)) where
    each element is a list of [B, C, H, W] tensors; backward targets run in
    reversed time order (last predicted first).
    """
    n = len(features)
    if steps > 0 and n <= steps:
        raise TooFewBlocks(f"{n} blocks cannot support {steps} prediction steps")
    if steps == 0:
        return ([], []), ([], [])
    fwd_pred = predict_sequence(features[:n - steps], steps,
                                forward_agg, predictor, bank, temperature)
    fwd_target = list(features[n - steps:])
    reversed_feats = list(reversed(features))
    bwd_pred = predict_sequence(reversed_feats[:n - steps], steps,
                                backward_agg, predictor, bank, temperature)
    bwd_target = [features[steps - 1 - i] for i in range(steps)]
    return (fwd_pred, fwd_target), (bwd_pred, bwd_target)
