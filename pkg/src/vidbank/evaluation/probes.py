"""Classification probes on top of the pretrained representation.

Three modes: a linear probe and a one-hidden-layer non-linear probe on
frozen embeddings, and end-to-end finetuning where gradients flow into the
encoder and aggregator. Dropout is applied ahead of the final affine layer.
Label fractions select a stratified subset of the training labels.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..configs import ProbeConfig, TrainConfig
from ..data.index import DatasetIndex, load_clip_frames
from ..errors import InsufficientClasses
from ..loss import LossReport  # noqa: F401  (kept for type parity in reports)
from ..models.network import PredictiveVideoModel, build_model
from .embeddings import EmbeddingSet, clip_windows


class ProbeHead(nn.Module):
    def __init__(self, in_dim: int, num_classes: int, nonlinear: bool,
                 dropout: float):
        super().__init__()
        if nonlinear:
            self.hidden = nn.Sequential(nn.Linear(in_dim, in_dim), nn.ReLU())
        else:
            self.hidden = nn.Identity()
        self.dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(in_dim, num_classes)

    def forward(self, x):
        return self.classifier(self.dropout(self.hidden(x)))


def stratified_label_subset(labels: np.ndarray, fraction: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Indices of a stratified `fraction` of the labels, >= 1 per class."""
    chosen = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        take = max(1, round(fraction * len(idx)))
        chosen.append(rng.permutation(idx)[:take])
    return np.sort(np.concatenate(chosen))


def _check_classes(labels: np.ndarray):
    if len(np.unique(labels)) < 2:
        raise InsufficientClasses("classifier training needs >= 2 classes")


def train_probe(train_set: EmbeddingSet, test_set: EmbeddingSet,
                probe: ProbeConfig, num_classes: int):
    """Linear or non-linear probe on frozen embeddings -> (head, accuracy)."""
    if probe.mode == "finetune":
        raise ValueError("finetune mode needs clips; use finetune_classifier")
    rng = np.random.Generator(np.random.PCG64(probe.seed))
    keep = stratified_label_subset(train_set.labels, probe.label_fraction, rng)
    x_train = torch.from_numpy(train_set.vectors[keep]).float()
    y_train = torch.from_numpy(train_set.labels[keep])
    _check_classes(train_set.labels[keep])

    torch.manual_seed(probe.seed)
    head = ProbeHead(x_train.shape[1], num_classes,
                     nonlinear=(probe.mode == "nonlinear"),
                     dropout=probe.dropout)
    optimizer = torch.optim.Adam(head.parameters(), lr=probe.lr)
    lr, decayed, best, patience = probe.lr, False, None, 0

    head.train()
    for _ in range(probe.epochs):
        order = torch.from_numpy(rng.permutation(len(x_train)))
        epoch_loss = 0.0
        for i in range(0, len(order), probe.batch_size):
            batch = order[i:i + probe.batch_size]
            logits = head(x_train[batch])
            loss = F.cross_entropy(logits, y_train[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss) * len(batch)
        epoch_loss /= len(order)
        lr, decayed, best, patience = _plateau(
            epoch_loss, probe, optimizer, lr, decayed, best, patience)

    accuracy = _probe_accuracy(head, test_set)
    return head, accuracy


def _probe_accuracy(head: ProbeHead, test_set: EmbeddingSet) -> float:
    head.eval()
    with torch.no_grad():
        logits = head(torch.from_numpy(test_set.vectors).float())
        pred = logits.argmax(dim=1).numpy()
    return float((pred == test_set.labels).mean())


def probe_logits(head: ProbeHead, embeddings: EmbeddingSet) -> np.ndarray:
    head.eval()
    with torch.no_grad():
        return head(torch.from_numpy(embeddings.vectors).float()).numpy()


# ---------------------------------------------------------------------------
# End-to-end finetuning
# ---------------------------------------------------------------------------

class FinetuneModel(nn.Module):
    def __init__(self, backbone: PredictiveVideoModel, num_classes: int,
                 dropout: float):
        super().__init__()
        self.backbone = backbone
        self.head = ProbeHead(backbone.channels, num_classes,
                              nonlinear=False, dropout=dropout)

    def forward(self, x):
        context = self.backbone.context(x)       # [B, C, H', W']
        return self.head(context.mean(dim=(2, 3)))


def finetune_classifier(index: DatasetIndex, train_cfg: TrainConfig,
                        probe: ProbeConfig, num_classes: int,
                        init_params: dict[str, np.ndarray] | None = None):
    """Finetune encoder + aggregator + classifier head -> (model, accuracy).

    `init_params` seeds the backbone from a pretrained checkpoint; None
    trains from random initialization.
    """
    train_entries = index.subset(split="train", modality=train_cfg.modality).entries
    test_entries = index.subset(split="test", modality=train_cfg.modality).entries
    labels = np.asarray([e.label for e in train_entries])
    rng = np.random.Generator(np.random.PCG64(probe.seed))
    keep = stratified_label_subset(labels, probe.label_fraction, rng)
    _check_classes(labels[keep])

    torch.manual_seed(probe.seed)
    backbone = build_model(train_cfg.backbone, train_cfg.memory,
                           train_cfg.bidirectional)
    if init_params is not None:
        from ..training.checkpoint import load_model_params
        load_model_params(backbone, init_params)
    model = FinetuneModel(backbone, num_classes, probe.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=probe.lr)
    lr, decayed, best, patience = probe.lr, False, None, 0

    cache: dict[int, np.ndarray] = {}

    def window_batch(indices):
        batch = []
        for i in indices:
            if i not in cache:
                cache[i] = load_clip_frames(train_entries[i].path)
            windows = clip_windows(cache[i], train_cfg, hop=1)
            batch.append(windows[rng.integers(len(windows))])
        return torch.from_numpy(np.stack(batch))

    model.train()
    for _ in range(probe.epochs):
        order = rng.permutation(keep)
        epoch_loss = 0.0
        for i in range(0, len(order), probe.batch_size):
            idx = order[i:i + probe.batch_size]
            logits = model(window_batch(idx))
            target = torch.from_numpy(labels[idx])
            loss = F.cross_entropy(logits, target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss) * len(idx)
        epoch_loss /= len(order)
        lr, decayed, best, patience = _plateau(
            epoch_loss, probe, optimizer, lr, decayed, best, patience)

    # test: average logits over all windows of each clip (center crop)
    model.eval()
    correct = 0
    with torch.no_grad():
        for entry in test_entries:
            windows = clip_windows(load_clip_frames(entry.path), train_cfg)
            logits = model(torch.from_numpy(windows)).mean(dim=0)
            correct += int(logits.argmax().item() == entry.label)
    accuracy = correct / len(test_entries) if test_entries else float("nan")
    return model, accuracy


def data_efficiency_sweep(fractions: list[float], probe: ProbeConfig,
                          index: DatasetIndex, train_cfg: TrainConfig,
                          pretrained_params: dict[str, np.ndarray],
                          seeds: list[int]):
    """Finetune from pretrained and from random init at each label fraction.

    Returns rows (fraction, init, seed, accuracy).
    """
    rows = []
    for fraction in fractions:
        for seed in seeds:
            cfg = probe.model_copy(update={
                "label_fraction": fraction, "mode": "finetune", "seed": seed})
            for init_name, params in (("pretrained", pretrained_params),
                                      ("random", None)):
                _, acc = finetune_classifier(index, train_cfg, cfg,
                                             index.num_classes, params)
                rows.append((fraction, init_name, seed, acc))
    return rows


def _plateau(epoch_loss, probe: ProbeConfig, optimizer, lr, decayed, best,
             patience):
    """Decay the lr once when the training loss stops improving."""
    if best is None or best - epoch_loss > 1e-4:
        return lr, decayed, epoch_loss, 0
    patience += 1
    if not decayed and patience >= probe.plateau_patience:
        lr = lr * probe.lr_decay_factor
        for group in optimizer.param_groups:
            group["lr"] = lr
        decayed = True
    return lr, decayed, best, patience
