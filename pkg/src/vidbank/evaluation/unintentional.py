"""Failure-moment (unintentional action) classification.

Each block of a clip is a short action segment: blocks entirely before the
labeled failure frame are intentional, blocks containing it are
transitioning, blocks after it are unintentional. Per step, the observed
block feature and the feature predicted from the past are spatially pooled,
concatenated, and passed to a linear 3-way classifier. Training draws the
rare transitioning class as often as the others; at test time per-step
predictions are smoothed by majority vote over a temporal moving window,
with ties resolved toward transitioning.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..configs import ProbeConfig, TrainConfig
from ..data.augment import center_crop
from ..data.clips import partition_clip, sliding_window_starts
from ..data.index import DatasetIndex, load_clip_frames
from ..errors import MissingTimestamp
from ..models.memory import address, expect_future
from ..models.convgru import aggregate_sequence
from ..models.network import PredictiveVideoModel, build_model

INTENTIONAL, TRANSITIONING, UNINTENTIONAL = 0, 1, 2
NUM_CLASSES = 3


def block_label(offsets: tuple[int, ...], failure_frame: int) -> int:
    if offsets[-1] < failure_frame:
        return INTENTIONAL
    if offsets[0] >= failure_frame:
        return UNINTENTIONAL
    return TRANSITIONING


@dataclass
class StepItem:
    clip: int
    start: int
    step: int        # target block index within the window (>= 1)
    label: int


class BalancedStepSampler:
    """Uniform over classes, then uniform within the class pool."""

    def __init__(self, items: list[StepItem]):
        self.pools: dict[int, list[int]] = {}
        for i, item in enumerate(items):
            self.pools.setdefault(item.label, []).append(i)
        self.classes = sorted(self.pools)

    def draw(self, rng: np.random.Generator) -> int:
        cls = self.classes[int(rng.integers(len(self.classes)))]
        pool = self.pools[cls]
        return pool[int(rng.integers(len(pool)))]


def _clip_items(frames_len: int, clip: int, failure: int,
                config: TrainConfig) -> list[StepItem]:
    block_len = config.backbone.block_len
    window = config.num_blocks * block_len * config.stride
    starts = sliding_window_starts(frames_len, config.num_blocks, block_len,
                                   config.stride, hop=window)
    items = []
    for start in starts:
        for t in range(1, config.num_blocks):
            offsets = tuple(start + (t * block_len + l) * config.stride
                            for l in range(block_len))
            items.append(StepItem(clip=clip, start=start, step=t,
                                  label=block_label(offsets, failure)))
    return items


def _step_features(model: PredictiveVideoModel, x: torch.Tensor):
    """Per-step concat(pool(z_t), pool(z_hat_t)): [B, N-1, 2C].

    z_hat_t is predicted from blocks 0..t-1 by one addressing/expectation
    round at each step of the forward recurrence.
    """
    z = model.encode_blocks(x)                   # [B, N, C, H, W]
    features = list(z.unbind(dim=1))
    hidden = None
    rows = []
    temperature = model.memory_config.temperature
    for t in range(len(features)):
        if t > 0:
            p = address(hidden, model.predictor, temperature)
            z_hat = expect_future(p, model.bank)
            observed = features[t].mean(dim=(2, 3))
            predicted = z_hat.mean(dim=(2, 3))
            rows.append(torch.cat([observed, predicted], dim=1))
        hidden = model.aggregator(features[t], hidden)
    return torch.stack(rows, dim=1)


def _majority_smooth(preds: list[int], vote_window: int = 3) -> list[int]:
    radius = vote_window // 2
    smoothed = []
    for t in range(len(preds)):
        window = preds[max(0, t - radius):t + radius + 1]
        counts = np.bincount(window, minlength=NUM_CLASSES)
        top = counts.max()
        winners = np.flatnonzero(counts == top)
        if len(winners) > 1 and TRANSITIONING in winners:
            smoothed.append(TRANSITIONING)
        else:
            smoothed.append(int(winners[0]))
    return smoothed


def unintentional_train_eval(index: DatasetIndex, failures: dict[str, int],
                             train_cfg: TrainConfig, probe: ProbeConfig,
                             mode: str = "freeze",
                             init_params: dict[str, np.ndarray] | None = None,
                             iterations: int | None = None) -> float:
    """Train the discrepancy classifier, return test step accuracy."""
    if mode not in ("freeze", "finetune"):
        raise ValueError(f"mode must be freeze or finetune, got {mode!r}")
    torch.manual_seed(probe.seed)
    model = build_model(train_cfg.backbone, train_cfg.memory,
                        train_cfg.bidirectional)
    if init_params is not None:
        from ..training.checkpoint import load_model_params
        load_model_params(model, init_params)

    def failure_of(path: str) -> int:
        key = os.path.normpath(path)
        if key not in failures:
            raise MissingTimestamp(f"clip {path} has no failure timestamp")
        return failures[key]

    train_entries = index.subset(split="train", modality=train_cfg.modality).entries
    test_entries = index.subset(split="test", modality=train_cfg.modality).entries

    clips = [load_clip_frames(e.path) for e in train_entries]
    items: list[StepItem] = []
    for ci, (entry, frames) in enumerate(zip(train_entries, clips)):
        items.extend(_clip_items(frames.shape[0], ci, failure_of(entry.path),
                                 train_cfg))
    sampler = BalancedStepSampler(items)
    rng = np.random.Generator(np.random.PCG64(probe.seed))

    classifier = nn.Linear(2 * model.channels, NUM_CLASSES)
    if mode == "freeze":
        accuracy = _train_frozen(model, classifier, clips, items, sampler,
                                 rng, train_cfg, probe, iterations)
    else:
        accuracy = _train_finetune(model, classifier, clips, items, sampler,
                                   rng, train_cfg, probe, iterations)

    return _evaluate(model, classifier, test_entries, failure_of, train_cfg,
                     accuracy)


def _window_tensor(frames: np.ndarray, start: int, config: TrainConfig):
    seq = partition_clip(frames, config.num_blocks, config.backbone.block_len,
                         config.stride, start=start)
    blocks = center_crop(seq.blocks, config.backbone.input_size)
    return torch.from_numpy(
        np.ascontiguousarray(blocks.transpose(0, 4, 1, 2, 3)))


def _train_frozen(model, classifier, clips, items, sampler, rng, train_cfg,
                  probe, iterations):
    model.eval()
    feature_cache: dict[tuple[int, int], torch.Tensor] = {}
    with torch.no_grad():
        for item in items:
            key = (item.clip, item.start)
            if key not in feature_cache:
                x = _window_tensor(clips[item.clip], item.start, train_cfg)
                feature_cache[key] = _step_features(model, x.unsqueeze(0))[0]
    features = torch.stack([
        feature_cache[(item.clip, item.start)][item.step - 1] for item in items])
    labels = torch.tensor([item.label for item in items])

    optimizer = torch.optim.Adam(classifier.parameters(), lr=probe.lr)
    total = iterations if iterations is not None else probe.epochs * max(
        1, len(items) // probe.batch_size)
    for _ in range(total):
        idx = torch.tensor([sampler.draw(rng) for _ in range(probe.batch_size)])
        loss = F.cross_entropy(classifier(features[idx]), labels[idx])
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return None


def _train_finetune(model, classifier, clips, items, sampler, rng, train_cfg,
                    probe, iterations):
    model.train()
    optimizer = torch.optim.Adam(
        list(model.parameters()) + list(classifier.parameters()), lr=probe.lr)
    total = iterations if iterations is not None else probe.epochs * max(
        1, len(items) // probe.batch_size)
    for _ in range(total):
        chosen = [items[sampler.draw(rng)] for _ in range(probe.batch_size)]
        windows = {}
        for item in chosen:
            windows.setdefault((item.clip, item.start), []).append(item)
        losses = []
        for (clip, start), group in windows.items():
            x = _window_tensor(clips[clip], start, train_cfg).unsqueeze(0)
            feats = _step_features(model, x)[0]
            picked = torch.stack([feats[item.step - 1] for item in group])
            target = torch.tensor([item.label for item in group])
            losses.append(F.cross_entropy(classifier(picked), target,
                                          reduction="sum"))
        loss = torch.stack(losses).sum() / len(chosen)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    return None


def _evaluate(model, classifier, test_entries, failure_of, train_cfg, _unused):
    model.eval()
    correct = 0
    total = 0
    with torch.no_grad():
        for entry in test_entries:
            frames = load_clip_frames(entry.path)
            failure = failure_of(entry.path)
            clip_items = _clip_items(frames.shape[0], 0, failure, train_cfg)
            preds, labels = [], []
            for start in sorted({item.start for item in clip_items}):
                x = _window_tensor(frames, start, train_cfg)
                feats = _step_features(model, x.unsqueeze(0))[0]
                logits = classifier(feats)
                step_preds = logits.argmax(dim=1).tolist()
                preds.extend(step_preds)
                labels.extend(item.label for item in clip_items
                              if item.start == start)
            smoothed = _majority_smooth(preds)
            correct += sum(int(p == l) for p, l in zip(smoothed, labels))
            total += len(labels)
    return correct / total if total else float("nan")
