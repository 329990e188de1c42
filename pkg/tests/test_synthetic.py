import os

import numpy as np
import pytest

from vidbank.configs import GlitchSpec, MotionClass, SyntheticSpec
from vidbank.data.index import load_clip_frames, load_index
from vidbank.data.synthetic import gen_glitch, gen_synthetic, load_failures


def estimate_displacement(frame_a: np.ndarray, frame_b: np.ndarray):
    """Circular cross-correlation oracle: integer (dx, dy) moving a into b."""
    a = frame_a.mean(axis=-1)
    b = frame_b.mean(axis=-1)
    a = a - a.mean()
    b = b - b.mean()
    corr = np.fft.ifft2(np.fft.fft2(a).conj() * np.fft.fft2(b)).real
    dy, dx = np.unravel_index(np.argmax(corr), corr.shape)
    h, w = a.shape
    if dy > h // 2:
        dy -= h
    if dx > w // 2:
        dx -= w
    return dx, dy


def test_displacement_oracle_convention():
    rng = np.random.default_rng(0)
    frame = rng.random((20, 20, 3))
    shifted = np.roll(np.roll(frame, 3, axis=0), -5, axis=1)   # dy=3, dx=-5
    assert estimate_displacement(frame, shifted) == (-5, 3)


def test_counts_and_stratified_split(tmp_path):
    spec = SyntheticSpec(num_classes=4, clips_per_class=10, seed=1,
                         noise_std=0.0, modalities=["rgb"])
    index = load_index(gen_synthetic(spec, str(tmp_path)))
    assert len(index.entries) == 40
    assert len(index.subset(split="train").entries) == 32
    assert len(index.subset(split="test").entries) == 8
    for cls in range(4):
        train_c = [e for e in index.subset(split="train").entries if e.label == cls]
        assert len(train_c) == 8


def test_zero_speed_class_is_static(tmp_path):
    spec = SyntheticSpec(num_classes=1, clips_per_class=1, seed=2, noise_std=0.0,
                         motion=[MotionClass(direction=0.0, speed=0.0)],
                         clip_len=10, modalities=["rgb"])
    index = load_index(gen_synthetic(spec, str(tmp_path)))
    frames = load_clip_frames(index.entries[0].path)
    for t in range(1, frames.shape[0]):
        np.testing.assert_array_equal(frames[t], frames[0])


def test_same_class_same_displacement_different_appearance(tmp_path):
    # integer speed: every frame pair of the class shares one displacement
    spec = SyntheticSpec(num_classes=1, clips_per_class=2, seed=3, noise_std=0.0,
                         motion=[MotionClass(direction=0.0, speed=2.0)],
                         clip_len=12, modalities=["rgb"])
    index = load_index(gen_synthetic(spec, str(tmp_path)))
    a = load_clip_frames(index.entries[0].path)
    b = load_clip_frames(index.entries[1].path)
    assert not np.array_equal(a[0], b[0])
    for frames in (a, b):
        for t in range(frames.shape[0] - 1):
            assert estimate_displacement(frames[t], frames[t + 1]) == (2, 0)


def test_nearest_centroid_on_displacement_is_perfect(tmp_path):
    import math
    spec = SyntheticSpec(num_classes=4, clips_per_class=5, seed=4, noise_std=0.0,
                         modalities=["rgb"])
    index = load_index(gen_synthetic(spec, str(tmp_path)))
    motion = spec.motion_classes()
    centroids = np.array([
        [m.speed * math.cos(m.direction), m.speed * math.sin(m.direction)]
        for m in motion])
    correct = 0
    train = index.subset(split="train").entries
    for entry in train:
        frames = load_clip_frames(entry.path)
        disp = np.mean([estimate_displacement(frames[t], frames[t + 1])
                        for t in range(frames.shape[0] - 1)], axis=0)
        pred = int(np.argmin(np.linalg.norm(centroids - disp, axis=1)))
        correct += int(pred == entry.label)
    assert correct == len(train)


def test_single_frame_does_not_reveal_class(tmp_path):
    # nearest-centroid on mean frame pixels should be near chance
    spec = SyntheticSpec(num_classes=2, clips_per_class=12, seed=5,
                         noise_std=0.0, modalities=["rgb"])
    index = load_index(gen_synthetic(spec, str(tmp_path)))
    feats, labels = [], []
    for entry in index.subset(split="train").entries:
        frames = load_clip_frames(entry.path)
        feats.append(frames[0].mean(axis=(0, 1)))
        labels.append(entry.label)
    feats = np.stack(feats)
    labels = np.asarray(labels)
    centroids = np.stack([feats[labels == c].mean(axis=0) for c in range(2)])
    pred = np.argmin(
        np.linalg.norm(feats[:, None] - centroids[None], axis=2), axis=1)
    accuracy = (pred == labels).mean()
    assert accuracy < 0.8


def test_flow_modality_layout(synthetic_dir):
    out, index_path, spec = synthetic_dir
    index = load_index(index_path)
    flow_entries = index.subset(modality="flow").entries
    assert flow_entries
    frames = load_clip_frames(flow_entries[0].path)
    assert (frames[..., 2] == 0).all()
    # encoded values stay inside the affine range
    assert frames.min() >= 0.0 and frames.max() <= 1.0


def test_generation_is_deterministic(tmp_path):
    spec = SyntheticSpec(num_classes=2, clips_per_class=2, seed=6,
                         modalities=["rgb"])
    p1 = gen_synthetic(spec, str(tmp_path / "a"))
    p2 = gen_synthetic(spec, str(tmp_path / "b"))
    i1, i2 = load_index(p1), load_index(p2)
    for e1, e2 in zip(i1.entries, i2.entries):
        np.testing.assert_array_equal(load_clip_frames(e1.path),
                                      load_clip_frames(e2.path))


def test_glitch_dataset_files_and_failure_range(tmp_path):
    spec = GlitchSpec(base=SyntheticSpec(num_classes=2, clips_per_class=3,
                                         seed=7, modalities=["rgb"]))
    index_path, failures_path = gen_glitch(spec, str(tmp_path))
    index = load_index(index_path)
    failures = load_failures(failures_path)
    assert len(failures) == len(index.entries) == 6
    t = spec.base.clip_len
    for entry in index.entries:
        failure = failures[os.path.normpath(entry.path)]
        assert int(spec.failure_lo * t) <= failure < int(spec.failure_hi * t) + 1


def test_glitch_breaks_motion_after_failure(tmp_path):
    spec = GlitchSpec(base=SyntheticSpec(
        num_classes=1, clips_per_class=1, seed=8, noise_std=0.0,
        motion=[MotionClass(direction=0.0, speed=2.0)], modalities=["rgb"]))
    index_path, failures_path = gen_glitch(spec, str(tmp_path))
    index = load_index(index_path)
    failures = load_failures(failures_path)
    frames = load_clip_frames(index.entries[0].path)
    failure = failures[os.path.normpath(index.entries[0].path)]
    before = [estimate_displacement(frames[t], frames[t + 1])
              for t in range(failure - 2)]
    assert all(d == (2, 0) for d in before)
    after = [estimate_displacement(frames[t], frames[t + 1])
             for t in range(failure, frames.shape[0] - 1)]
    assert any(d != (2, 0) for d in after)
