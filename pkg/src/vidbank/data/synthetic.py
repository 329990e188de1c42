"""Deterministic synthetic video generator for desk-scale experiments.

Each class is a motion pattern (direction, speed); sprite appearance (kind,
color, background) is drawn independently of the class, so a single frame
carries no class information -- only motion across frames does. Sprites
translate with wrap-around at frame edges so arbitrary clip lengths stay
in-frame.

`gen_glitch` builds the failure-moment variant: motion is coherent up to a
known failure frame, after which the remaining frames are shuffled.
"""

from __future__ import annotations

import math
import os

import numpy as np

from ..configs import GlitchSpec, SyntheticSpec, SPRITE_KINDS
from ..errors import DataError
from .flow import preprocess_flow
from .index import DatasetIndex, IndexEntry, save_clip_frames, save_index


def _sprite_canvas(kind: str, size: int) -> np.ndarray:
    """Binary sprite mask [size, size]."""
    mask = np.zeros((size, size), dtype=np.float32)
    c = size // 2
    if kind == "square":
        mask[:, :] = 1.0
    elif kind == "circle":
        yy, xx = np.mgrid[0:size, 0:size]
        mask[(yy - c) ** 2 + (xx - c) ** 2 <= c * c] = 1.0
    elif kind == "cross":
        t = max(1, size // 4)
        mask[c - t // 2:c + t // 2 + 1, :] = 1.0
        mask[:, c - t // 2:c + t // 2 + 1] = 1.0
    elif kind == "bar":
        t = max(1, size // 3)
        mask[c - t // 2:c + t // 2 + 1, :] = 1.0
    else:
        raise ValueError(f"unknown sprite kind {kind!r}")
    return mask


def _clip_rng(seed: int, clip_index: int) -> np.random.Generator:
    # Stream keyed on (seed, clip_index): output independent of worker layout.
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, clip_index])))


def _compose_scene(spec: SyntheticSpec, motion, rng: np.random.Generator):
    """Random scene canvas: sprites of random kind/color that all translate
    together (returns the canvas image and its coverage mask).

    Sprites sit on a jittered grid without overlap so scene coverage is
    stable across clips; otherwise appearance variance drowns the motion
    signal that defines the classes.
    """
    size = spec.frame_size
    s = spec.sprite_size
    canvas = np.zeros((size, size, 3), dtype=np.float32)
    mask = np.zeros((size, size), dtype=np.float32)
    cells = max(1, size // (s + 1))
    anchors = [(r, c) for r in range(cells) for c in range(cells)]
    order = rng.permutation(len(anchors))
    pitch = size / cells
    for slot in range(min(spec.num_sprites, len(anchors))):
        r, c = anchors[order[slot]]
        kind = motion.sprite
        if kind == "random":
            kind = SPRITE_KINDS[int(rng.integers(len(SPRITE_KINDS)))]
        color = rng.uniform(0.55, 1.0, size=3).astype(np.float32)
        stamp = _sprite_canvas(kind, s)
        jitter = rng.integers(-1, 2, size=2)
        top = int(r * pitch + jitter[0]) % size
        left = int(c * pitch + jitter[1]) % size
        rows = (np.arange(s) + top) % size
        cols = (np.arange(s) + left) % size
        patch_img = canvas[np.ix_(rows, cols)]
        patch_mask = mask[np.ix_(rows, cols)]
        place = stamp > 0
        patch_img[place] = color
        patch_mask[place] = 1.0
        canvas[np.ix_(rows, cols)] = patch_img
        mask[np.ix_(rows, cols)] = patch_mask
    return canvas, mask


def _render_clip(spec: SyntheticSpec, class_id: int, clip_index: int):
    """Returns (rgb frames [T,H,W,3] float, per-step displacement [T-1,2],
    per-frame integer position, scene mask)."""
    motion = spec.motion_classes()[class_id]
    rng = _clip_rng(spec.seed, clip_index)

    background = np.float32(0.05)
    canvas, scene_mask = _compose_scene(spec, motion, rng)

    size = spec.frame_size
    vx = motion.speed * math.cos(motion.direction)
    vy = motion.speed * math.sin(motion.direction)
    x0 = float(rng.integers(size))
    y0 = float(rng.integers(size))

    frames = np.empty((spec.clip_len, size, size, 3), dtype=np.float32)
    positions = np.empty((spec.clip_len, 2), dtype=np.int64)
    for t in range(spec.clip_len):
        px = int(round(x0 + vx * t))
        py = int(round(y0 + vy * t))
        positions[t] = (px, py)
        shifted = np.roll(np.roll(canvas, py, axis=0), px, axis=1)
        shifted_mask = np.roll(np.roll(scene_mask, py, axis=0), px, axis=1)
        frame = np.where(shifted_mask[..., None] > 0, shifted, background)
        if spec.noise_std > 0:
            frame = frame + rng.normal(0.0, spec.noise_std, frame.shape).astype(np.float32)
        frames[t] = np.clip(frame, 0.0, 1.0)

    displacements = (positions[1:] - positions[:-1]).astype(np.float64)
    return frames, displacements, positions, scene_mask


def _flow_frames(rgb_shape, displacements, positions, sprite_mask) -> np.ndarray:
    """Per-frame encoded flow: sprite pixels carry (dx, dy), background zero."""
    t_total, size = rgb_shape[0], rgb_shape[1]
    out = np.empty((t_total, size, size, 3), dtype=np.uint8)
    for t in range(t_total):
        d = displacements[min(t, len(displacements) - 1)]
        px, py = positions[t]
        mask = np.roll(np.roll(sprite_mask, py, axis=0), px, axis=1)
        field = np.zeros((size, size, 2), dtype=np.float64)
        field[mask > 0, 0] = d[0]
        field[mask > 0, 1] = d[1]
        out[t] = preprocess_flow(field)
    return out


def _splits(spec: SyntheticSpec) -> list[str]:
    n_train = round(spec.clips_per_class * spec.train_fraction)
    n_train = min(max(n_train, 1), spec.clips_per_class - 1) \
        if spec.clips_per_class > 1 else spec.clips_per_class
    return ["train"] * n_train + ["test"] * (spec.clips_per_class - n_train)


def gen_synthetic(spec: SyntheticSpec, out_dir: str) -> str:
    """Write clips and index.csv under out_dir; returns the index path."""
    os.makedirs(out_dir, exist_ok=True)
    splits = _splits(spec)
    entries = []
    clip_index = 0
    for class_id in range(spec.num_classes):
        for i in range(spec.clips_per_class):
            frames, disp, positions, sprite_mask = _render_clip(spec, class_id, clip_index)
            rgb_u8 = (frames * 255.0 + 0.5).astype(np.uint8)
            clip_name = f"c{class_id}_{i:03d}"
            for modality in spec.modalities:
                clip_dir = os.path.join(out_dir, modality, clip_name)
                if modality == "rgb":
                    save_clip_frames(rgb_u8, clip_dir)
                else:
                    save_clip_frames(
                        _flow_frames(rgb_u8.shape, disp, positions, sprite_mask),
                        clip_dir)
                entries.append(IndexEntry(
                    path=clip_dir, label=class_id, split=splits[i],
                    modality=modality))
            clip_index += 1
    index = DatasetIndex(entries=tuple(entries), num_classes=spec.num_classes)
    index_path = os.path.join(out_dir, "index.csv")
    save_index(index, index_path, relative_to=out_dir)
    return index_path


def gen_glitch(spec: GlitchSpec, out_dir: str) -> tuple[str, str]:
    """Write glitch clips, index.csv, and failures.csv (path,failure_frame)."""
    base = spec.base
    os.makedirs(out_dir, exist_ok=True)
    splits = _splits(base)
    entries = []
    failures = []
    clip_index = 0
    for class_id in range(base.num_classes):
        for i in range(base.clips_per_class):
            frames, _, _, _ = _render_clip(base, class_id, clip_index)
            rng = _clip_rng(base.seed ^ 0x5F5F5F, clip_index)
            t_total = frames.shape[0]
            lo = int(spec.failure_lo * t_total)
            hi = int(spec.failure_hi * t_total)
            failure = int(rng.integers(lo, max(hi, lo + 1)))
            tail = np.arange(failure, t_total)
            rng.shuffle(tail)
            frames = np.concatenate([frames[:failure], frames[tail]], axis=0)
            clip_name = f"g{class_id}_{i:03d}"
            clip_dir = os.path.join(out_dir, "rgb", clip_name)
            save_clip_frames((frames * 255.0 + 0.5).astype(np.uint8), clip_dir)
            entries.append(IndexEntry(
                path=clip_dir, label=class_id, split=splits[i], modality="rgb"))
            failures.append((clip_dir, failure))
            clip_index += 1
    index = DatasetIndex(entries=tuple(entries), num_classes=base.num_classes)
    index_path = os.path.join(out_dir, "index.csv")
    save_index(index, index_path, relative_to=out_dir)
    failures_path = os.path.join(out_dir, "failures.csv")
    with open(failures_path, "w") as fh:
        fh.write("path,failure_frame\n")
        for path, failure in failures:
            fh.write(f"{os.path.relpath(path, out_dir)},{failure}\n")
    return index_path, failures_path


def load_failures(failures_path: str) -> dict[str, int]:
    base = os.path.dirname(os.path.abspath(failures_path))
    table = {}
    try:
        with open(failures_path) as fh:
            header = fh.readline().strip()
            if header != "path,failure_frame":
                raise DataError(f"bad failures header {header!r}")
            for line in fh:
                path, frame = line.rsplit(",", 1)
                if not os.path.isabs(path):
                    path = os.path.join(base, path)
                table[os.path.normpath(path)] = int(frame)
    except OSError as exc:
        raise DataError(f"cannot read failures {failures_path}: {exc}") from exc
    return table
