"""The full self-supervised network: encoder + recurrent aggregator(s) +
future predictor + memory bank, wired for single- or bi-directional
prediction over a batch of block sequences.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..configs import BackboneConfig, MemoryConfig
from ..errors import ShapeMismatch
from .convgru import ConvGRUCell, aggregate_sequence
from .encoder import BlockEncoder
from .memory import FuturePredictor, MemoryBank, bidirectional_predict, predict_sequence


class PredictiveVideoModel(nn.Module):
    def __init__(self, backbone: BackboneConfig, memory: MemoryConfig,
                 bidirectional: bool = False):
        super().__init__()
        self.backbone_config = backbone
        self.memory_config = memory
        self.bidirectional = bidirectional
        self.encoder = BlockEncoder(backbone)
        channels = self.encoder.out_channels
        self.aggregator = ConvGRUCell(channels)
        self.aggregator_b = ConvGRUCell(channels) if bidirectional else None
        self.predictor = FuturePredictor(
            channels, memory.k, hidden=memory.predictor_hidden,
            activation=memory.predictor_activation)
        self.bank = MemoryBank(memory.k, channels)

    @property
    def channels(self) -> int:
        return self.encoder.out_channels

    def encode_blocks(self, x: torch.Tensor) -> torch.Tensor:
        """[B, N, 3, L, H, W] -> [B, N, C, H', W'] via the shared encoder."""
        if x.dim() != 6:
            raise ShapeMismatch(f"expected [B, N, 3, L, H, W], got {tuple(x.shape)}")
        b, n = x.shape[:2]
        z = self.encoder(x.reshape(b * n, *x.shape[2:]))
        return z.reshape(b, n, *z.shape[1:])

    def prediction_pairs(self, x: torch.Tensor, pred_steps: int):
        """Returns [(pred, target)] stacked [B, S, C, H, W], one per direction."""
        z = self.encode_blocks(x)
        features = list(z.unbind(dim=1))
        n = len(features)
        if self.bidirectional:
            (f_pred, f_tgt), (b_pred, b_tgt) = bidirectional_predict(
                features, pred_steps, self.aggregator, self.aggregator_b,
                self.predictor, self.bank, self.memory_config.temperature)
            return [
                (torch.stack(f_pred, dim=1), torch.stack(f_tgt, dim=1)),
                (torch.stack(b_pred, dim=1), torch.stack(b_tgt, dim=1)),
            ]
        pred = predict_sequence(
            features[:n - pred_steps], pred_steps, self.aggregator,
            self.predictor, self.bank, self.memory_config.temperature)
        target = features[n - pred_steps:]
        return [(torch.stack(pred, dim=1), torch.stack(target, dim=1))]

    def context(self, x: torch.Tensor) -> torch.Tensor:
        """Forward-aggregated context feature [B, C, H', W'] over all blocks."""
        z = self.encode_blocks(x)
        return aggregate_sequence(self.aggregator, z.unbind(dim=1))


def build_model(backbone: BackboneConfig, memory: MemoryConfig,
                bidirectional: bool = False, seed: int | None = None) -> PredictiveVideoModel:
    if seed is not None:
        torch.manual_seed(seed)
    return PredictiveVideoModel(backbone, memory, bidirectional)
