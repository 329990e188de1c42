"""Batch assembly for pretraining.

Every sample's randomness (clip choice, window start, augmentation) derives
from (global_seed, step, slot), so batches are identical however loading is
parallelized, and a resumed run continues the exact stream.
"""

from __future__ import annotations

import numpy as np

from ..configs import AugmentPolicy, TrainConfig
from ..data.augment import augment, center_crop
from ..data.clips import loop_pad, partition_clip, sliding_window_starts
from ..data.index import DatasetIndex, load_clip_frames, validate_index
from ..errors import DataExhausted


def _to_model_layout(blocks: np.ndarray) -> np.ndarray:
    # [N, L, h, w, 3] -> [N, 3, L, h, w]
    return np.ascontiguousarray(blocks.transpose(0, 4, 1, 2, 3))


class ClipDataset:
    def __init__(self, index: DatasetIndex, config: TrainConfig, split: str):
        subset = index.subset(split=split, modality=config.modality)
        self.config = config
        window = config.num_blocks * config.backbone.block_len * config.stride
        self.window = window
        if config.loop_pad_short_clips:
            self.entries = list(subset.entries)
            self.rejected = []
        else:
            valid, rejected = validate_index(subset, window)
            self.entries = list(valid.entries)
            self.rejected = rejected
        if not self.entries:
            raise DataExhausted(
                f"no usable {config.modality} clips in split {split!r} "
                f"(need >= {window} frames; {len(self.rejected)} rejected)")
        self.num_classes = index.num_classes
        self._cache: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def frames(self, i: int) -> np.ndarray:
        if i not in self._cache:
            frames = load_clip_frames(self.entries[i].path)
            if self.config.loop_pad_short_clips:
                frames = loop_pad(frames, self.window)
            self._cache[i] = frames
        return self._cache[i]

    def _sample_one(self, seed_key: tuple[int, ...], policy: AugmentPolicy,
                    input_size: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_key)))
        i = int(rng.integers(len(self.entries)))
        frames = self.frames(i)
        starts = sliding_window_starts(
            frames.shape[0], self.config.num_blocks,
            self.config.backbone.block_len, self.config.stride, hop=1)
        start = int(starts[rng.integers(len(starts))])
        seq = partition_clip(
            frames, self.config.num_blocks, self.config.backbone.block_len,
            self.config.stride, start=start, source_id=self.entries[i].path)
        seq = augment(seq, policy, seed=int(rng.integers(2 ** 31)))
        blocks = seq.blocks
        if blocks.shape[2] != input_size:
            blocks = center_crop(blocks, input_size)
        return _to_model_layout(blocks)

    def train_batch(self, step: int) -> np.ndarray:
        """[B, N, 3, L, s, s] float32 batch for one training step."""
        cfg = self.config
        samples = [
            self._sample_one((cfg.seed, step, slot), cfg.augment,
                             cfg.backbone.input_size)
            for slot in range(cfg.batch_size)
        ]
        return np.stack(samples)

    def eval_batches(self, batch_size: int, max_clips: int | None = None):
        """Deterministic evaluation batches: window start 0, center crop."""
        cfg = self.config
        n = len(self.entries) if max_clips is None else min(max_clips, len(self.entries))
        batch = []
        for i in range(n):
            seq = partition_clip(
                self.frames(i), cfg.num_blocks, cfg.backbone.block_len,
                cfg.stride, start=0, source_id=self.entries[i].path)
            blocks = center_crop(seq.blocks, cfg.backbone.input_size)
            batch.append(_to_model_layout(blocks))
            if len(batch) == batch_size:
                yield np.stack(batch)
                batch = []
        if len(batch) >= 2:   # contrastive loss needs negatives
            yield np.stack(batch)
