"""Dataset manifests and clip frame IO.

An index is a CSV with header `path,label,split,modality`. Clip paths point
at directories holding either zero-padded numbered image frames
(frame_00000.png style) or a single packed `frames.npy` array [T, H, W, 3]
uint8; both readers are supported.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..errors import DataError

INDEX_HEADER = ["path", "label", "split", "modality"]
PACKED_NAME = "frames.npy"
FRAME_PATTERN = "frame_{:05d}.png"
_IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class IndexEntry:
    path: str
    label: int
    split: str          # "train" | "test"
    modality: str       # "rgb" | "flow"


@dataclass(frozen=True)
class DatasetIndex:
    entries: tuple[IndexEntry, ...]
    num_classes: int

    def subset(self, split: str | None = None,
               modality: str | None = None) -> "DatasetIndex":
        kept = tuple(
            e for e in self.entries
            if (split is None or e.split == split)
            and (modality is None or e.modality == modality))
        return DatasetIndex(entries=kept, num_classes=self.num_classes)

    def __len__(self) -> int:
        return len(self.entries)


def load_index(path: str) -> DatasetIndex:
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != INDEX_HEADER:
                raise DataError(
                    f"index {path} has header {reader.fieldnames}, "
                    f"expected {INDEX_HEADER}")
            for row in reader:
                clip = row["path"]
                if not os.path.isabs(clip):
                    clip = os.path.join(base, clip)
                if row["split"] not in ("train", "test"):
                    raise DataError(f"bad split {row['split']!r} in {path}")
                if row["modality"] not in ("rgb", "flow"):
                    raise DataError(f"bad modality {row['modality']!r} in {path}")
                entries.append(IndexEntry(
                    path=clip, label=int(row["label"]),
                    split=row["split"], modality=row["modality"]))
    except OSError as exc:
        raise DataError(f"cannot read index {path}: {exc}") from exc
    if not entries:
        raise DataError(f"index {path} has no entries")
    num_classes = max(e.label for e in entries) + 1
    if any(e.label < 0 for e in entries):
        raise DataError("negative class label in index")
    return DatasetIndex(entries=tuple(entries), num_classes=num_classes)


def save_index(index: DatasetIndex, path: str, relative_to: str | None = None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(INDEX_HEADER)
        for e in index.entries:
            clip = e.path
            if relative_to is not None:
                clip = os.path.relpath(clip, relative_to)
            writer.writerow([clip, e.label, e.split, e.modality])


def count_frames(clip_path: str) -> int:
    packed = os.path.join(clip_path, PACKED_NAME)
    if os.path.exists(packed):
        return int(np.load(packed, mmap_mode="r").shape[0])
    return len(_frame_files(clip_path))


def load_clip_frames(clip_path: str) -> np.ndarray:
    """Load a clip as float32 [T, H, W, 3] in [0, 1]."""
    packed = os.path.join(clip_path, PACKED_NAME)
    if os.path.exists(packed):
        arr = np.load(packed)
        if arr.ndim != 4 or arr.shape[-1] != 3:
            raise DataError(f"{packed} is not a [T, H, W, 3] array")
        return arr.astype(np.float32) / 255.0
    files = _frame_files(clip_path)
    if not files:
        raise DataError(f"clip {clip_path} holds no frames")
    frames = []
    for name in files:
        with Image.open(os.path.join(clip_path, name)) as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    stacked = np.stack(frames).astype(np.float32) / 255.0
    return stacked


def save_clip_frames(frames_u8: np.ndarray, clip_path: str, packed: bool = False):
    """Write [T, H, W, 3] uint8 frames as numbered PNGs or one packed array."""
    os.makedirs(clip_path, exist_ok=True)
    if packed:
        np.save(os.path.join(clip_path, PACKED_NAME), frames_u8)
        return
    for t in range(frames_u8.shape[0]):
        Image.fromarray(frames_u8[t]).save(
            os.path.join(clip_path, FRAME_PATTERN.format(t)))


def validate_index(index: DatasetIndex, min_frames: int):
    """Split entries into usable and rejected (too short / unreadable)."""
    valid, errors = [], []
    for e in index.entries:
        try:
            n = count_frames(e.path)
        except (OSError, DataError) as exc:
            errors.append((e, f"unreadable: {exc}"))
            continue
        if n < min_frames:
            errors.append((e, f"{n} frames < required {min_frames}"))
        else:
            valid.append(e)
    return DatasetIndex(entries=tuple(valid), num_classes=index.num_classes), errors


def _frame_files(clip_path: str) -> list[str]:
    try:
        names = sorted(
            n for n in os.listdir(clip_path)
            if n.lower().endswith(_IMAGE_EXTS))
    except OSError as exc:
        raise DataError(f"cannot list clip {clip_path}: {exc}") from exc
    return names
