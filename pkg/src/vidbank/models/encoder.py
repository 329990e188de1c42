"""Block encoder: a residual network with 2D early stages and
spatio-temporal late stages, ending in a temporal mean pool.

All convolutions are expressed as Conv3d; 2D stages simply use temporal
kernel 1. The stage table comes from the backbone config, so the same code
runs the full-scale and the tiny test variant.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..configs import BackboneConfig, StageSpec, StemSpec
from ..errors import ShapeMismatch


def _conv(in_ch, out_ch, temporal_kernel, temporal_stride=1, spatial_stride=1):
    return nn.Conv3d(
        in_ch, out_ch,
        kernel_size=(temporal_kernel, 3, 3),
        stride=(temporal_stride, spatial_stride, spatial_stride),
        padding=(temporal_kernel // 2, 1, 1),
        bias=False,
    )


def _norm(channels, use_bn):
    return nn.BatchNorm3d(channels) if use_bn else nn.Identity()


class BasicBlock(nn.Module):
    """Two-conv residual unit (post-activation ordering)."""

    def __init__(self, in_ch, out_ch, temporal_kernel, temporal_stride,
                 spatial_stride, use_bn):
        super().__init__()
        self.conv1 = _conv(in_ch, out_ch, temporal_kernel,
                           temporal_stride, spatial_stride)
        self.bn1 = _norm(out_ch, use_bn)
        self.conv2 = _conv(out_ch, out_ch, temporal_kernel)
        self.bn2 = _norm(out_ch, use_bn)
        self.relu = nn.ReLU(inplace=True)
        if in_ch != out_ch or temporal_stride != 1 or spatial_stride != 1:
            self.downsample = nn.Sequential(
                nn.Conv3d(in_ch, out_ch, kernel_size=1,
                          stride=(temporal_stride, spatial_stride, spatial_stride),
                          bias=False),
                _norm(out_ch, use_bn),
            )
        else:
            self.downsample = None

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class BlockEncoder(nn.Module):
    """Maps a video block [B, 3, L, H, W] to features [B, C, H', W']."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        stem: StemSpec = config.stem()
        stages: list[StageSpec] = config.stage_table()
        use_bn = config.use_batchnorm

        k = stem.spatial_kernel
        self.stem = nn.Sequential(
            nn.Conv3d(3, stem.channels, kernel_size=(1, k, k),
                      stride=(1, stem.spatial_stride, stem.spatial_stride),
                      padding=(0, k // 2, k // 2), bias=False),
            _norm(stem.channels, use_bn),
            nn.ReLU(inplace=True),
        )
        self.pool = (nn.MaxPool3d(kernel_size=(1, 3, 3), stride=(1, 2, 2),
                                  padding=(0, 1, 1))
                     if stem.pool else nn.Identity())

        blocks = []
        in_ch = stem.channels
        for stage in stages:
            for b in range(stage.blocks):
                first = b == 0
                blocks.append(BasicBlock(
                    in_ch, stage.channels, stage.temporal_kernel,
                    stage.temporal_stride if first else 1,
                    stage.spatial_stride if first else 1,
                    use_bn))
                in_ch = stage.channels
        self.stages = nn.Sequential(*blocks)
        self.out_channels = in_ch
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, nn.Conv3d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in",
                                        nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm3d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 5 or x.shape[1] != 3:
            raise ShapeMismatch(f"expected block [B, 3, L, H, W], got {tuple(x.shape)}")
        if x.shape[2] != self.config.block_len:
            raise ShapeMismatch(
                f"block length {x.shape[2]} != configured {self.config.block_len}")
        if x.shape[3] != self.config.input_size or x.shape[4] != self.config.input_size:
            raise ShapeMismatch(
                f"frame size {x.shape[3]}x{x.shape[4]} != configured "
                f"{self.config.input_size}")
        out = self.pool(self.stem(x))
        out = self.stages(out)
        # collapse the remaining temporal extent to 1
        return out.mean(dim=2)
