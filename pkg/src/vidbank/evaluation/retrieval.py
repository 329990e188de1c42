"""Nearest-neighbour retrieval scored by recall at k.

Gallery items are ranked by cosine distance to each query; R@k is the
fraction of queries with at least one same-class item among the k nearest.
Ties rank by gallery index (stable sort) so results are deterministic.
"""

from __future__ import annotations

import numpy as np

from ..errors import ZeroNormEmbedding
from .embeddings import EmbeddingSet


def _unit_rows(x: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ZeroNormEmbedding(f"{what} contains a zero-norm embedding")
    return x / norms


def retrieve(queries: EmbeddingSet, gallery: EmbeddingSet,
             ks: list[int]) -> dict[int, float]:
    if len(gallery.clip_ids) == 0:
        raise ZeroNormEmbedding("gallery is empty")
    if sorted(ks) != list(ks):
        raise ValueError("ks must be sorted ascending")
    q = _unit_rows(queries.vectors, "queries")
    g = _unit_rows(gallery.vectors, "gallery")
    distance = 1.0 - q @ g.T                      # [Q, G]
    order = np.argsort(distance, axis=1, kind="stable")
    recalls = {}
    for k in ks:
        top = order[:, :min(k, order.shape[1])]
        hit = (gallery.labels[top] == queries.labels[:, None]).any(axis=1)
        recalls[k] = float(hit.mean())
    return recalls


def save_retrieval_csv(recalls: dict[int, float], path: str):
    with open(path, "w") as fh:
        fh.write("k,recall\n")
        for k in sorted(recalls):
            fh.write(f"{k},{recalls[k]:.6f}\n")
