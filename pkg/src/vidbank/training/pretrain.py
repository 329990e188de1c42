"""Self-supervised pretraining loop.

Single-stream (RGB or flow), optionally bidirectional. Adam with the
learning rate decayed once by `lr_decay_factor` when the validation loss
stops improving for `plateau_patience` consecutive checks. Fully
reproducible: model init comes from the config seed and every batch derives
from (seed, step, slot), so two runs with the same config produce identical
trajectories, and a resumed run continues the original one bit for bit.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass

import numpy as np
import torch

from ..configs import TrainConfig
from ..data.index import DatasetIndex
from ..errors import DivergedTraining
from ..loss import combine_bidirectional, dense_contrastive_loss
from ..models.network import PredictiveVideoModel, build_model
from .checkpoint import (
    load_checkpoint,
    load_model_params,
    model_param_arrays,
    rng_state_payload,
    save_checkpoint,
)
from .dataset import ClipDataset

METRICS_HEADER = ["step", "split", "loss", "top1", "lr", "wall_ms"]


@dataclass
class PretrainResult:
    run_dir: str
    steps: int
    final_train_loss: float
    min_train_loss: float
    best_val_loss: float | None
    chance_loss: float
    best_checkpoint: str | None
    last_checkpoint: str
    metrics_path: str


def architecture_signature(config: TrainConfig) -> dict:
    return {
        "backbone": config.backbone.model_dump(),
        "memory": config.memory.model_dump(),
        "bidirectional": config.bidirectional,
    }


def batch_loss(model: PredictiveVideoModel, x: torch.Tensor, config: TrainConfig):
    """Loss and mean report stats for one batch [B, N, 3, L, s, s]."""
    pairs = model.prediction_pairs(x, config.pred_steps)
    losses, reports = [], []
    for pred, target in pairs:
        loss, report = dense_contrastive_loss(
            pred, target, normalized=config.normalized_critic)
        losses.append(loss)
        reports.append(report)
    if len(losses) == 2:
        total = combine_bidirectional(losses[0], losses[1])
    else:
        total = losses[0]
    top1 = float(np.mean([r.top1_accuracy for r in reports]))
    return total, top1, reports[0].num_candidates


def pretrain(config: TrainConfig, index: DatasetIndex, run_dir: str,
             resume_from: str | None = None) -> PretrainResult:
    os.makedirs(os.path.join(run_dir, "checkpoints"), exist_ok=True)
    metrics_path = os.path.join(run_dir, "metrics.csv")

    if config.deterministic:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(config.seed)
    model = build_model(config.backbone, config.memory, config.bidirectional)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)

    train_ds = ClipDataset(index, config, split="train")
    try:
        val_ds = ClipDataset(index, config, split="test")
    except Exception:
        val_ds = None

    start_step = 0
    lr = config.lr
    lr_decayed = False
    best_val = None
    plateau_count = 0
    if resume_from is not None:
        params, optim_arrays, manifest = load_checkpoint(resume_from)
        load_model_params(model, params, manifest,
                          expected_arch=architecture_signature(config))
        _restore_optimizer(optimizer, model, optim_arrays)
        meta = manifest.get("metadata", {})
        start_step = int(manifest["step"])
        lr = float(meta.get("lr", config.lr))
        lr_decayed = bool(meta.get("lr_decayed", False))
        best_val = manifest.get("best_val_loss")
        plateau_count = int(meta.get("plateau_count", 0))
        _set_lr(optimizer, lr)

    write_header = not (resume_from and os.path.exists(metrics_path))
    metrics_fh = open(metrics_path, "w" if write_header else "a", newline="")
    metrics = csv.writer(metrics_fh)
    if write_header:
        metrics.writerow(METRICS_HEADER)

    def emit(step, split, loss, top1, wall_ms):
        metrics.writerow([step, split, f"{loss:.8f}", f"{top1:.6f}",
                          f"{lr:.8g}", f"{wall_ms:.3f}"])
        metrics_fh.flush()

    def snapshot(step):
        manifest = {
            "config": config.model_dump(mode="json"),
            "step": step,
            "best_val_loss": best_val,
            "rng_state": rng_state_payload(),
            "metadata": {"lr": lr, "lr_decayed": lr_decayed,
                         "plateau_count": plateau_count},
        }
        return model_param_arrays(model), manifest, _optimizer_arrays(optimizer, model)

    def save_as(name, step):
        params, manifest, optim_arrays = snapshot(step)
        return save_checkpoint(os.path.join(run_dir, "checkpoints", name),
                               params, manifest, optim_arrays)

    best_ckpt_path = None
    last_saved = None
    final_train_loss = math.nan
    min_train_loss = math.inf
    chance = math.nan

    try:
        for step in range(start_step + 1, config.max_steps + 1):
            t0 = time.perf_counter()
            x = torch.from_numpy(train_ds.train_batch(step))
            model.train()
            total, top1, num_candidates = batch_loss(model, x, config)
            chance = math.log(num_candidates)
            loss_value = float(total.detach())
            if not math.isfinite(loss_value):
                # parameters have not been stepped with the bad gradient yet
                rescue = save_as("last_good.ckpt", step - 1)
                raise DivergedTraining(
                    f"loss became {loss_value} at step {step}; "
                    f"last good checkpoint: {rescue}")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            final_train_loss = loss_value
            min_train_loss = min(min_train_loss, loss_value)
            emit(step, "train", loss_value, top1, (time.perf_counter() - t0) * 1e3)

            if val_ds is not None and step % config.val_every == 0:
                t0 = time.perf_counter()
                val_loss, val_top1 = _validate(model, val_ds, config)
                emit(step, "val", val_loss, val_top1,
                     (time.perf_counter() - t0) * 1e3)
                if best_val is None or best_val - val_loss > config.plateau_min_delta:
                    best_val = val_loss
                    plateau_count = 0
                    best_ckpt_path = save_as("best.ckpt", step)
                else:
                    plateau_count += 1
                    if not lr_decayed and plateau_count >= config.plateau_patience:
                        lr = lr * config.lr_decay_factor
                        _set_lr(optimizer, lr)
                        lr_decayed = True

            if step % config.checkpoint_every == 0:
                last_saved = save_as(f"step_{step:06d}.ckpt", step)

        last_saved = save_as("last.ckpt", config.max_steps)
    finally:
        metrics_fh.close()

    return PretrainResult(
        run_dir=run_dir,
        steps=config.max_steps,
        final_train_loss=final_train_loss,
        min_train_loss=min_train_loss,
        best_val_loss=best_val,
        chance_loss=chance,
        best_checkpoint=best_ckpt_path,
        last_checkpoint=last_saved,
        metrics_path=metrics_path,
    )


def _validate(model: PredictiveVideoModel, val_ds: ClipDataset,
              config: TrainConfig, max_clips: int = 32):
    model.eval()
    losses, top1s = [], []
    with torch.no_grad():
        for batch in val_ds.eval_batches(config.batch_size, max_clips=max_clips):
            total, top1, _ = batch_loss(model, torch.from_numpy(batch), config)
            losses.append(float(total))
            top1s.append(top1)
    model.train()
    if not losses:
        return math.nan, math.nan
    return float(np.mean(losses)), float(np.mean(top1s))


def _set_lr(optimizer, lr: float):
    for group in optimizer.param_groups:
        group["lr"] = lr


def _optimizer_arrays(optimizer, model) -> dict[str, np.ndarray]:
    arrays = {}
    for name, p in model.named_parameters():
        state = optimizer.state.get(p)
        if not state:
            continue
        for key in ("step", "exp_avg", "exp_avg_sq"):
            arrays[f"{name}.{key}"] = state[key].detach().cpu().numpy().copy()
    return arrays


def _restore_optimizer(optimizer, model, arrays: dict[str, np.ndarray]):
    for name, p in model.named_parameters():
        key = f"{name}.step"
        if key not in arrays:
            continue
        optimizer.state[p] = {
            "step": torch.from_numpy(arrays[f"{name}.step"].copy()),
            "exp_avg": torch.from_numpy(arrays[f"{name}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"{name}.exp_avg_sq"].copy()),
        }
