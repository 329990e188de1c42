"""Export the learned memory content for external inspection.

Writes three CSV files:
  memory_magnitude.csv    slot,magnitude             (L2 norm of each row)
  memory_neighbours.csv   slot,rank,clip_id,score    (top-3 training clips
                          by dot product between the memory row and the
                          clip's pooled embedding)
  addressing_vectors.csv  clip_id,label,p0..p{k-1}   (per-clip mean
                          addressing distribution, for external projection)
"""

from __future__ import annotations

import csv
import os

import numpy as np
import torch

from ..configs import TrainConfig
from ..data.index import DatasetIndex, load_clip_frames
from ..models.memory import address
from ..models.network import PredictiveVideoModel
from .embeddings import clip_windows, extract_embeddings

TOP_NEIGHBOURS = 3


def mean_addressing_vector(frames: np.ndarray, model: PredictiveVideoModel,
                           config: TrainConfig) -> np.ndarray:
    """Spatial- and window-mean addressing distribution: [k]."""
    windows = clip_windows(frames, config)
    model.eval()
    with torch.no_grad():
        context = model.context(torch.from_numpy(windows))
        p = address(context, model.predictor, model.memory_config.temperature)
    return p.mean(dim=(0, 2, 3)).double().numpy()


def export_memory_views(model: PredictiveVideoModel, index: DatasetIndex,
                        config: TrainConfig, out_dir: str) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    bank = model.bank.M.detach().double().numpy()      # [k, C]

    magnitude_path = os.path.join(out_dir, "memory_magnitude.csv")
    with open(magnitude_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "magnitude"])
        for i, row in enumerate(bank):
            writer.writerow([i, f"{np.linalg.norm(row):.10g}"])

    train_embeddings = extract_embeddings(index, model, config, split="train")
    scores = bank @ train_embeddings.vectors.T         # [k, num_clips]
    neighbours_path = os.path.join(out_dir, "memory_neighbours.csv")
    with open(neighbours_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "rank", "clip_id", "score"])
        for i in range(scores.shape[0]):
            order = np.argsort(-scores[i], kind="stable")[:TOP_NEIGHBOURS]
            for rank, j in enumerate(order, start=1):
                writer.writerow([i, rank, train_embeddings.clip_ids[j],
                                 f"{scores[i, j]:.10g}"])

    addressing_path = os.path.join(out_dir, "addressing_vectors.csv")
    subset = index.subset(split="train", modality=config.modality)
    with open(addressing_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label"] +
                        [f"p{i}" for i in range(bank.shape[0])])
        for entry in subset.entries:
            vec = mean_addressing_vector(load_clip_frames(entry.path), model,
                                         config)
            writer.writerow([entry.path, entry.label] +
                            [f"{v:.10g}" for v in vec])

    return {
        "magnitude": magnitude_path,
        "neighbours": neighbours_path,
        "addressing": addressing_path,
    }
