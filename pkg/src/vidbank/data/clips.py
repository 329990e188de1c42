"""Partitioning a frame sequence into fixed-length blocks.

A sampling window covers num_blocks * block_len frames taken at a fixed
temporal stride; block b, position l reads frame start + (b*block_len + l) * stride.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientFrames


@dataclass(frozen=True)
class VideoBlockSequence:
    """A clip partitioned into N blocks of L frames, pixels in [0, 1].

    blocks: float32 array [N, L, H, W, 3]
    frame_offsets: absolute frame index of every sampled frame (N*L entries)
    """

    blocks: np.ndarray
    source_id: str = ""
    frame_offsets: tuple[int, ...] = field(default=())

    @property
    def num_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_len(self) -> int:
        return self.blocks.shape[1]

    def block_offsets(self, b: int) -> tuple[int, ...]:
        l = self.block_len
        return self.frame_offsets[b * l:(b + 1) * l]


def partition_clip(frames: np.ndarray, num_blocks: int, block_len: int,
                   stride: int = 1, start: int = 0,
                   source_id: str = "") -> VideoBlockSequence:
    """Slice [T, H, W, 3] frames into num_blocks blocks of block_len frames.

    Raises InsufficientFrames when fewer than num_blocks*block_len*stride
    frames are available from `start`; the caller decides whether to skip
    or loop-pad the clip.
    """
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise ValueError(f"expected frames [T, H, W, 3], got {frames.shape}")
    needed = num_blocks * block_len * stride
    available = frames.shape[0] - start
    if available < needed:
        raise InsufficientFrames(
            f"clip {source_id or '<anonymous>'} has {available} frames from "
            f"offset {start}, needs {needed} "
            f"({num_blocks} blocks x {block_len} frames x stride {stride})")
    offsets = [start + (b * block_len + l) * stride
               for b in range(num_blocks) for l in range(block_len)]
    sampled = frames[offsets]
    blocks = sampled.reshape(num_blocks, block_len, *frames.shape[1:])
    return VideoBlockSequence(
        blocks=np.ascontiguousarray(blocks, dtype=np.float32),
        source_id=source_id,
        frame_offsets=tuple(offsets),
    )


def sliding_window_starts(total_frames: int, num_blocks: int, block_len: int,
                          stride: int, hop: int | None = None) -> list[int]:
    """Start offsets of every full sampling window inside a clip."""
    window = num_blocks * block_len * stride
    if hop is None:
        hop = block_len * stride
    starts = list(range(0, total_frames - window + 1, hop))
    return starts


def loop_pad(frames: np.ndarray, min_len: int) -> np.ndarray:
    """Repeat the clip until it covers at least min_len frames."""
    if frames.shape[0] >= min_len:
        return frames
    reps = -(-min_len // frames.shape[0])
    return np.concatenate([frames] * reps, axis=0)[:min_len]
