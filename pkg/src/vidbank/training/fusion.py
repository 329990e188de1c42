"""Two-stream late fusion: class logits from independently trained RGB and
flow models are combined by an element-wise arithmetic mean."""

from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch


def fuse_two_stream(logits_rgb: np.ndarray, logits_flow: np.ndarray) -> np.ndarray:
    a = np.asarray(logits_rgb, dtype=np.float64)
    b = np.asarray(logits_flow, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"logit shapes differ: {a.shape} vs {b.shape}")
    return (a + b) / 2.0
