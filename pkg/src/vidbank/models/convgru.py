"""Single-layer convolutional GRU with 1x1 kernels.

The 1x1 kernel shares the recurrence weights across all spatial positions,
so each position evolves independently given its own input column. The cell
output doubles as the hidden state; a left fold over block features from a
zero state yields the context feature.
"""

from __future__ import annotations

from typing import Iterable

import torch
import torch.nn as nn

from ..errors import EmptySequence, ShapeMismatch


class ConvGRUCell(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.reset_gate = nn.Conv2d(2 * channels, channels, kernel_size=1)
        self.update_gate = nn.Conv2d(2 * channels, channels, kernel_size=1)
        self.candidate = nn.Conv2d(2 * channels, channels, kernel_size=1)
        self.reset_parameters()

    def reset_parameters(self):
        for conv in (self.reset_gate, self.update_gate, self.candidate):
            nn.init.kaiming_normal_(conv.weight, mode="fan_in")
            nn.init.zeros_(conv.bias)

    def forward(self, z: torch.Tensor, hidden: torch.Tensor | None) -> torch.Tensor:
        """One recurrent update; hidden=None starts from the zero state."""
        if z.dim() != 4 or z.shape[1] != self.channels:
            raise ShapeMismatch(
                f"expected input [B, {self.channels}, H, W], got {tuple(z.shape)}")
        if hidden is None:
            hidden = torch.zeros_like(z)
        elif hidden.shape != z.shape:
            raise ShapeMismatch(
                f"hidden shape {tuple(hidden.shape)} != input {tuple(z.shape)}")
        stacked = torch.cat([z, hidden], dim=1)
        r = torch.sigmoid(self.reset_gate(stacked))
        u = torch.sigmoid(self.update_gate(stacked))
        n = torch.tanh(self.candidate(torch.cat([z, r * hidden], dim=1)))
        return (1 - u) * n + u * hidden


def aggregate_sequence(cell: ConvGRUCell,
                       features: Iterable[torch.Tensor]) -> torch.Tensor:
    """Left fold of the cell over block features, starting from zeros."""
    hidden = None
    for z in features:
        hidden = cell(z, hidden)
    if hidden is None:
        raise EmptySequence("cannot aggregate an empty feature sequence")
    return hidden
