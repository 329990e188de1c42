"""Optical-flow preprocessing: clamp displacements and encode as 8-bit images.

Displacements beyond +/-20 are truncated, then [-20, 20] is mapped affinely
onto [0, 255] with half-up rounding; a third all-zero channel makes the
result a 3-channel image so the flow stream reuses the RGB pipeline.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteInput

FLOW_CLAMP = 20.0


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # np.round rounds half to even; the on-disk encoding pins half-up.
    return np.floor(x + 0.5)


def preprocess_flow(flow: np.ndarray) -> np.ndarray:
    """Encode an [H, W, 2] displacement field as an [H, W, 3] uint8 frame."""
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise ValueError(f"expected flow [H, W, 2], got {flow.shape}")
    if not np.isfinite(flow).all():
        raise NonFiniteInput("flow field contains NaN or Inf")
    clamped = np.clip(flow, -FLOW_CLAMP, FLOW_CLAMP)
    scaled = _round_half_up((clamped + FLOW_CLAMP) / (2 * FLOW_CLAMP) * 255.0)
    out = np.zeros((*flow.shape[:2], 3), dtype=np.uint8)
    out[..., :2] = scaled.astype(np.uint8)
    return out
