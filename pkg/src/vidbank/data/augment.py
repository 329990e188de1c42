"""Clip-wise crop/flip and frame-wise photometric augmentation.

Crop position and flip decision are drawn once per clip and applied to all
frames; jitter factors and the greyscale coin are drawn per frame. The whole
transform is a pure function of (sequence, policy, seed).
"""

from __future__ import annotations

import numpy as np

from ..configs import AugmentPolicy
from ..errors import InvalidPolicy
from .clips import VideoBlockSequence

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def augment(seq: VideoBlockSequence, policy: AugmentPolicy,
            seed: int) -> VideoBlockSequence:
    blocks = seq.blocks
    n, l, h, w, _ = blocks.shape
    rng = np.random.Generator(np.random.PCG64(seed))

    if policy.crop_size is not None:
        if policy.crop_size > h or policy.crop_size > w:
            raise InvalidPolicy(
                f"crop size {policy.crop_size} exceeds frame size {h}x{w}")
        top = int(rng.integers(0, h - policy.crop_size + 1))
        left = int(rng.integers(0, w - policy.crop_size + 1))
        blocks = blocks[:, :, top:top + policy.crop_size,
                        left:left + policy.crop_size, :]

    if policy.flip_p > 0 and rng.random() < policy.flip_p:
        blocks = blocks[:, :, :, ::-1, :]

    needs_frame_pass = (policy.brightness > 0 or policy.contrast > 0
                        or policy.saturation > 0 or policy.greyscale_p > 0)
    if needs_frame_pass:
        blocks = blocks.copy()
        flat = blocks.reshape(n * l, *blocks.shape[2:])
        for i in range(flat.shape[0]):
            flat[i] = _jitter_frame(flat[i], policy, rng)
        blocks = flat.reshape(n, l, *flat.shape[1:])

    return VideoBlockSequence(
        blocks=np.ascontiguousarray(blocks, dtype=np.float32),
        source_id=seq.source_id,
        frame_offsets=seq.frame_offsets,
    )


def _jitter_frame(frame: np.ndarray, policy: AugmentPolicy,
                  rng: np.random.Generator) -> np.ndarray:
    if policy.brightness > 0:
        f = rng.uniform(max(0.0, 1 - policy.brightness), 1 + policy.brightness)
        frame = frame * f
    if policy.contrast > 0:
        f = rng.uniform(max(0.0, 1 - policy.contrast), 1 + policy.contrast)
        frame = frame.mean() + (frame - frame.mean()) * f
    if policy.saturation > 0:
        f = rng.uniform(max(0.0, 1 - policy.saturation), 1 + policy.saturation)
        grey = frame @ _LUMA
        frame = grey[..., None] + (frame - grey[..., None]) * f
    if policy.greyscale_p > 0 and rng.random() < policy.greyscale_p:
        grey = frame @ _LUMA
        frame = np.repeat(grey[..., None], 3, axis=-1)
    return np.clip(frame, 0.0, 1.0)


def center_crop(frames: np.ndarray, size: int) -> np.ndarray:
    """Center-crop [..., H, W, 3] frames to [..., size, size, 3]."""
    h, w = frames.shape[-3], frames.shape[-2]
    if size > h or size > w:
        raise InvalidPolicy(f"crop size {size} exceeds frame size {h}x{w}")
    top = (h - size) // 2
    left = (w - size) // 2
    return frames[..., top:top + size, left:left + size, :]
