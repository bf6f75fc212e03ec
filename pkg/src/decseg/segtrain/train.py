"""Supervised and self-training loops, loss and prediction."""

from __future__ import annotations

import copy
import csv
import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..datakit import Dataset
from ..exceptions import ContractError, DataError, TrainingDivergenceError
from ..taxonomy import IGNORE_ID, RemapTable, remap_label
from .checkpoint import ModelCheckpoint
from .config import TrainConfig, lr_schedule
from .ema import ema_update, snapshot
from .nets import SegNet

log = logging.getLogger(__name__)


def pixel_cross_entropy(scores: torch.Tensor, labels: torch.Tensor, ignore_id: int = IGNORE_ID):
    """Mean cross-entropy over non-ignored pixels; NaN when nothing is labelled."""
    return F.cross_entropy(scores, labels, ignore_index=ignore_id, reduction="mean")


def to_tensor_images(images: np.ndarray) -> torch.Tensor:
    """``(N,H,W,C)`` or ``(H,W,C)`` array to an ``(N,C,H,W)`` float tensor."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ContractError(f"expected (N,H,W,C) or (H,W,C) images, got shape {arr.shape}")
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def as_arrays(data, table: RemapTable | None = None, need_labels=True):
    """Normalize a Dataset or an ``(images, labels)`` pair to arrays, remapping labels if asked."""
    if isinstance(data, Dataset):
        x, y = data.arrays()
    elif isinstance(data, tuple):
        x, y = data
    else:
        x, y = data, None
    x = None if x is None else np.asarray(x, dtype=np.float32)
    if y is None:
        if need_labels:
            raise DataError("training data has no labels")
        return x, None
    y = np.asarray(y)
    if table is not None:
        y = remap_label(y, table)
    return x, y.astype(np.int64)


def _check_labels(y: np.ndarray, n_out: int, ignore_id: int):
    bad = (y != ignore_id) & ((y < 0) | (y >= n_out))
    if bad.any():
        raise DataError(f"label ids {np.unique(y[bad]).tolist()} not valid for a model with n_out={n_out}")


def make_optimizer(model, config: TrainConfig):
    params = [p for p in model.parameters() if p.requires_grad]
    if config.optimizer == "sgd":
        return torch.optim.SGD(params, lr=config.base_lr, momentum=config.momentum,
                               weight_decay=config.weight_decay)
    return torch.optim.AdamW(params, lr=config.base_lr, weight_decay=config.weight_decay)


class BatchSampler:
    """Seeded uniform sampling of batches with an optional random crop."""

    def __init__(self, n_items, config: TrainConfig, stream=0):
        self.n = n_items
        self.config = config
        self.gen = torch.Generator().manual_seed(config.seed * 1009 + stream)

    def __call__(self, *arrays):
        idx = torch.randint(self.n, (self.config.batch_size,), generator=self.gen)
        out = [a[idx] for a in arrays]
        crop = self.config.crop
        if crop is not None:
            h, w = out[0].shape[-2:]
            cw, ch = crop
            if cw < w or ch < h:
                top = int(torch.randint(h - ch + 1, (1,), generator=self.gen))
                left = int(torch.randint(w - cw + 1, (1,), generator=self.gen))
                out = [a[..., top : top + ch, left : left + cw] for a in out]
        return out


class MetricsLog:
    def __init__(self, path, columns):
        self.fh = None
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self.fh = open(path, "w", newline="")
            self.writer = csv.writer(self.fh)
            self.writer.writerow(columns)

    def row(self, *values):
        if self.fh is not None:
            self.writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in values])

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _set_lr(opt, lr):
    for g in opt.param_groups:
        g["lr"] = lr


def _snapshot_metrics(losses):
    if not losses:
        return None
    tail = losses[-min(len(losses), 20):]
    return {"final_loss": float(np.mean(tail)), "last_loss": float(losses[-1])}


def run_loop(model, config: TrainConfig, step_loss, *, teacher=None, log_path=None, columns=()):
    """Shared optimization loop.

    ``step_loss(t)`` returns the scalar loss for step ``t`` and a tuple of
    extra values logged under ``columns``. When ``teacher`` is given it is
    EMA-updated from ``model`` after every optimizer step. Returns the
    per-step losses. ``model`` is left in eval mode.
    """
    if config.deterministic:
        torch.use_deterministic_algorithms(True)
    opt = make_optimizer(model, config)
    metrics = MetricsLog(log_path, ["step", "lr", "loss", *columns])
    losses = []
    model.train()
    try:
        for t in range(config.iterations):
            lr = lr_schedule(t, config)
            _set_lr(opt, lr)
            loss, extra = step_loss(t)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergenceError(t, value)
            prev = snapshot(model) if teacher is not None and config.ema_mode == "literal" else None
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            if teacher is not None:
                ema_update(teacher, model, config.ema_alpha, previous_student=prev)
            losses.append(value)
            if t % config.log_every == 0 or t == config.iterations - 1:
                metrics.row(t, lr, value, *extra)
    finally:
        metrics.close()
        model.eval()
    return losses


def frozen_copy(model: SegNet) -> SegNet:
    teacher = copy.deepcopy(model)
    teacher.eval()
    for p in teacher.parameters():
        p.requires_grad_(False)
    return teacher


def train_supervised(
    model: SegNet,
    data,
    config: TrainConfig,
    *,
    table: RemapTable | None = None,
    ignore_id: int = IGNORE_ID,
    log_path=None,
    manifest: dict | None = None,
) -> ModelCheckpoint:
    """Minimize pixel-wise cross-entropy for ``config.iterations`` steps.

    ``data`` is a labelled Dataset or an ``(images, labels)`` pair; pass
    ``table`` to train a category model on global labels. ``model`` is
    updated in place and left in eval mode.
    """
    x, y = as_arrays(data, table)
    _check_labels(y, model.n_out, ignore_id)
    xt, yt = to_tensor_images(x), torch.from_numpy(y)
    sampler = BatchSampler(len(xt), config)

    def step_loss(t):
        xb, yb = sampler(xt, yt)
        return pixel_cross_entropy(model(xb), yb, ignore_id), ()

    losses = run_loop(model, config, step_loss, log_path=log_path)
    return ModelCheckpoint.from_model(
        model,
        config_hash=config.hash(),
        iteration=config.iterations,
        metrics=_snapshot_metrics(losses),
        role="student",
        **(manifest or {}),
    )


def train_selftrain(
    model: SegNet,
    source,
    target,
    config: TrainConfig,
    *,
    table: RemapTable | None = None,
    ignore_id: int = IGNORE_ID,
    log_path=None,
    manifest: dict | None = None,
) -> tuple[ModelCheckpoint, ModelCheckpoint]:
    """Mean-teacher pseudo-label adaptation from a labelled source to an unlabelled target.

    Each step adds, to the supervised source loss, a cross-entropy on a
    target batch against the teacher's argmax where the teacher's softmax
    confidence exceeds ``config.pseudo_threshold`` (scaled by the confident
    pixel fraction). The teacher follows the student by EMA after every
    step. Returns ``(student, teacher)`` checkpoints; ``model`` ends as the
    student.
    """
    x, y = as_arrays(source, table)
    _check_labels(y, model.n_out, ignore_id)
    xtgt, _ = as_arrays(target, need_labels=False)
    xs, ys = to_tensor_images(x), torch.from_numpy(y)
    xtg = to_tensor_images(xtgt)
    src_sampler = BatchSampler(len(xs), config)
    tgt_sampler = BatchSampler(len(xtg), config, stream=1)
    teacher = frozen_copy(model)

    def step_loss(t):
        xb, yb = src_sampler(xs, ys)
        (xtb,) = tgt_sampler(xtg)
        with torch.no_grad():
            conf, pseudo = F.softmax(teacher(xtb), dim=1).max(dim=1)
        # strict inequality: a threshold of 1.0 admits no pixel
        keep = conf > config.pseudo_threshold
        frac = keep.float().mean().item()
        loss = loss_src = pixel_cross_entropy(model(xb), yb, ignore_id)
        loss_tgt = 0.0
        if frac > 0:
            pseudo = torch.where(keep, pseudo, torch.full_like(pseudo, ignore_id))
            lt = pixel_cross_entropy(model(xtb), pseudo, ignore_id) * frac
            loss = loss + config.target_weight * lt
            loss_tgt = lt.item()
        return loss, (loss_src.item(), loss_tgt, frac)

    losses = run_loop(model, config, step_loss, teacher=teacher, log_path=log_path,
                      columns=("loss_source", "loss_target", "pseudo_fraction"))
    common = dict(config_hash=config.hash(), iteration=config.iterations,
                  metrics=_snapshot_metrics(losses), **(manifest or {}))
    return (
        ModelCheckpoint.from_model(model, role="student", **common),
        ModelCheckpoint.from_model(teacher, role="teacher", **common),
    )


@torch.no_grad()
def predict_scores(model: SegNet, images, batch_size: int = 32) -> torch.Tensor:
    x = images if isinstance(images, torch.Tensor) else to_tensor_images(images)
    model.check_input(x)
    was_training = model.training
    model.eval()
    try:
        return torch.cat([model(x[i : i + batch_size]) for i in range(0, len(x), batch_size)])
    finally:
        model.train(was_training)


def predict(model: SegNet, images, batch_size: int = 32) -> np.ndarray:
    """Per-pixel argmax. ``(H,W,C)`` gives ``(H,W)``; ``(N,H,W,C)`` gives ``(N,H,W)``."""
    single = not isinstance(images, torch.Tensor) and np.asarray(images).ndim == 3
    out = predict_scores(model, images, batch_size).argmax(dim=1).numpy()
    out = out.astype(np.uint8 if model.n_out <= 256 else np.int32)
    return out[0] if single else out

