"""Clip embeddings for downstream evaluation.

A clip is swept with sliding windows of the pretraining block layout; each
window's context feature is spatially mean-pooled to a C-vector and the
vectors are averaged over windows. Test-time frames are center-cropped to
the encoder input size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import torch

from ..configs import TrainConfig
from ..data.augment import center_crop
from ..data.clips import partition_clip, sliding_window_starts
from ..data.index import DatasetIndex, load_clip_frames
from ..errors import ClipTooShort
from ..models.network import PredictiveVideoModel


@dataclass
class EmbeddingSet:
    clip_ids: list[str]
    labels: np.ndarray       # [N] int
    vectors: np.ndarray      # [N, C] float64


def clip_windows(frames: np.ndarray, config: TrainConfig,
                 hop: int | None = None) -> np.ndarray:
    """All full sampling windows of a clip: [W, N, 3, L, s, s]."""
    block_len = config.backbone.block_len
    starts = sliding_window_starts(
        frames.shape[0], config.num_blocks, block_len, config.stride, hop=hop)
    if not starts:
        raise ClipTooShort(
            f"clip with {frames.shape[0]} frames cannot fill one window of "
            f"{config.num_blocks * block_len * config.stride} frames")
    windows = []
    for start in starts:
        seq = partition_clip(frames, config.num_blocks, block_len,
                             config.stride, start=start)
        blocks = center_crop(seq.blocks, config.backbone.input_size)
        windows.append(blocks.transpose(0, 4, 1, 2, 3))
    return np.ascontiguousarray(np.stack(windows))


def extract_embedding(frames: np.ndarray, model: PredictiveVideoModel,
                      config: TrainConfig, hop: int | None = None) -> np.ndarray:
    """Window-averaged, spatially pooled context feature: [C] float64."""
    windows = clip_windows(frames, config, hop=hop)
    model.eval()
    with torch.no_grad():
        context = model.context(torch.from_numpy(windows))   # [W, C, H', W']
        pooled = context.mean(dim=(2, 3))                     # [W, C]
    return pooled.mean(dim=0).double().numpy()


def extract_embeddings(index: DatasetIndex, model: PredictiveVideoModel,
                       config: TrainConfig, split: str | None = None,
                       hop: int | None = None) -> EmbeddingSet:
    subset = index.subset(split=split, modality=config.modality)
    ids, labels, vectors = [], [], []
    for entry in subset.entries:
        frames = load_clip_frames(entry.path)
        vectors.append(extract_embedding(frames, model, config, hop=hop))
        ids.append(entry.path)
        labels.append(entry.label)
    return EmbeddingSet(
        clip_ids=ids,
        labels=np.asarray(labels, dtype=np.int64),
        vectors=np.stack(vectors) if vectors else np.zeros((0, model.channels)))


def save_embeddings_csv(embeddings: EmbeddingSet, path: str):
    dim = embeddings.vectors.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label"] + [f"v{i}" for i in range(dim)])
        for cid, label, vec in zip(embeddings.clip_ids, embeddings.labels,
                                   embeddings.vectors):
            writer.writerow([cid, int(label)] + [f"{v:.10g}" for v in vec])


def load_embeddings_csv(path: str) -> EmbeddingSet:
    ids, labels, rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = len(header) - 2
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:2 + dim]])
    return EmbeddingSet(
        clip_ids=ids,
        labels=np.asarray(labels, dtype=np.int64),
        vectors=np.asarray(rows, dtype=np.float64))
