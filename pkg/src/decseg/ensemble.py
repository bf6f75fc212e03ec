"""Fusion of stacked category masks with a learned ensemble network.

Category masks are stacked channel-wise in strategy order into a
pseudo-image, min-max normalized, and mapped back to global classes by a
small segmentation network trained against source labels. The EMA teacher
of that network is used for inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .exceptions import ContractError, DataError
from .segtrain.checkpoint import ModelCheckpoint
from .segtrain.config import TrainConfig
from .segtrain.nets import PRESETS, SegNet
from .segtrain.train import (
    BatchSampler,
    _snapshot_metrics,
    as_arrays,
    frozen_copy,
    pixel_cross_entropy,
    predict,
    predict_scores,
    run_loop,
    to_tensor_images,
)
from .taxonomy import (
    IGNORE_ID,
    ClassTaxonomy,
    DivisionStrategy,
    build_remap_tables,
    cityscapes_taxonomy,
)


@dataclass(frozen=True)
class CategoryMask:
    """A category-space mask tagged with the index of its category."""

    values: np.ndarray
    category_index: int


def _unwrap(masks, strategy: DivisionStrategy | None):
    arrays = []
    for pos, m in enumerate(masks):
        if isinstance(m, CategoryMask):
            if m.category_index != pos:
                raise ContractError(
                    f"mask at position {pos} belongs to category {m.category_index}; "
                    "masks must follow strategy order"
                )
            m = m.values
        arrays.append(np.asarray(m))
    if strategy is not None and len(arrays) != strategy.n_categories:
        raise ContractError(f"expected {strategy.n_categories} category masks, got {len(arrays)}")
    if not arrays:
        raise ContractError("no category masks given")
    shape = arrays[0].shape
    for j, a in enumerate(arrays):
        if a.shape != shape:
            raise ContractError(f"mask {j} has shape {a.shape}, expected {shape}")
    return arrays


def stack_masks(
    masks: Sequence,
    strategy: DivisionStrategy | None = None,
    *,
    ignore_id: int = IGNORE_ID,
    per_channel: bool = False,
) -> np.ndarray:
    """Stack category masks into a normalized pseudo-image.

    ``masks`` holds one ``(H,W)`` (or batched ``(N,H,W)``) prediction per
    category, in strategy order. The result is ``(H,W,N_G)`` (or
    ``(N,H,W,N_G)``) float32 where the whole stack of each sample is scaled
    by ``(x - min) / (max - min)``; a constant stack becomes all zeros. With
    ``per_channel`` each channel is scaled on its own.
    """
    arrays = _unwrap(masks, strategy)
    x = np.stack(arrays, axis=-1)
    if np.any(x == ignore_id):
        raise ContractError("category masks must be predictions; found the ignore id")
    if strategy is not None:
        limits = np.asarray(strategy.n_outs)
        if np.any(x < 0) or np.any(x >= limits):
            raise ContractError("category mask values exceed the category's label space")
    x = x.astype(np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    axes = (1, 2) if per_channel else (1, 2, 3)
    lo = x.min(axis=axes, keepdims=True)
    hi = x.max(axis=axes, keepdims=True)
    span = hi - lo
    out = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    out = out.astype(np.float32)
    return out[0] if single else out


@dataclass
class EnsembleModel:
    """Fusion network (student and EMA teacher) bound to one division strategy."""

    student: SegNet
    teacher: SegNet
    strategy_hash: str
    category_model_hashes: list[str] = field(default_factory=list)
    per_channel: bool = False
    manifest: dict = field(default_factory=dict)

    @property
    def n_categories(self) -> int:
        return self.teacher.in_channels

    def check_strategy(self, strategy: DivisionStrategy):
        if strategy.hash() != self.strategy_hash:
            raise ContractError(
                f"ensemble was trained for strategy {self.strategy_hash}, "
                f"got {strategy.name!r} ({strategy.hash()})"
            )

    def save(self, path) -> Path:
        path = Path(path)
        extra = {
            "strategy_hash": self.strategy_hash,
            "category_model_hashes": list(self.category_model_hashes),
            "per_channel": self.per_channel,
            "category_index": "ensemble",
            **self.manifest,
        }
        ModelCheckpoint.from_model(self.teacher, role="teacher", **extra).save(path / "teacher")
        ModelCheckpoint.from_model(self.student, role="student", **extra).save(path / "student")
        (path / "manifest.json").write_text(json.dumps(extra, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        path = Path(path)
        teacher = ModelCheckpoint.load(path / "teacher")
        student = ModelCheckpoint.load(path / "student")
        man = teacher.manifest
        return cls(
            student.to_model(),
            teacher.to_model(),
            man["strategy_hash"],
            list(man.get("category_model_hashes", [])),
            bool(man.get("per_channel", False)),
            {k: man[k] for k in ("config_hash", "iteration", "metrics", "taxonomy_hash") if k in man},
        )


def _check_category_models(models, strategy: DivisionStrategy):
    if len(models) != strategy.n_categories:
        raise ContractError(f"{len(models)} category models for {strategy.n_categories} categories")
    for j, (m, n_out) in enumerate(zip(models, strategy.n_outs)):
        if m.n_out != n_out:
            raise ContractError(f"category model {j} predicts {m.n_out} classes, strategy needs {n_out}")
        h = m.meta.get("strategy_hash")
        if h is not None and h != strategy.hash():
            raise ContractError(f"category model {j} was trained for strategy {h}, not {strategy.hash()}")
        idx = m.meta.get("category_index")
        if idx is not None and idx != j:
            raise ContractError(f"model at position {j} was trained for category {idx}")


def category_masks_from_models(models: Sequence[SegNet], images) -> list[np.ndarray]:
    """Argmax prediction of every category model, ``[(N,H,W), ...]``."""
    return [predict(m, images) for m in models]


def oracle_category_masks(labels: np.ndarray, taxonomy: ClassTaxonomy,
                          strategy: DivisionStrategy) -> list[np.ndarray]:
    """Ground-truth category masks; ignored pixels become "other"."""
    out = []
    for table in build_remap_tables(taxonomy, strategy):
        m = table.lookup[np.asarray(labels, dtype=np.int64)]
        m = np.where(m == table.ignore_id, table.other_index, m)
        out.append(m.astype(np.uint8))
    return out


def train_ensemble(
    source_category_models: Sequence[SegNet] | None,
    source,
    config: TrainConfig,
    strategy: DivisionStrategy,
    taxonomy: ClassTaxonomy | None = None,
    *,
    masks: Sequence[np.ndarray] | None = None,
    oracle: bool = False,
    precompute: bool = False,
    per_channel: bool = False,
    widths=PRESETS["ensemble"],
    ignore_id: int = IGNORE_ID,
    log_path=None,
    init_seed: int | None = None,
) -> EnsembleModel:
    """Train the fusion network on source category masks against global labels.

    Category masks come from the frozen source category models, computed
    for every sampled batch (or once up front with ``precompute``). They can
    also be given directly as ``masks`` (one ``(N,H,W)`` array per category),
    or with ``oracle`` be the remapped ground-truth labels; neither needs
    models. The returned model infers with its EMA teacher.
    """
    taxonomy = taxonomy or cityscapes_taxonomy()
    x, y = as_arrays(source)
    if np.any((y != ignore_id) & (y >= taxonomy.n_classes)):
        raise DataError("source labels must be global class ids")
    models = list(source_category_models or [])
    if masks is not None:
        oracle = False
        models = []
    elif not oracle:
        _check_category_models(models, strategy)
        for m in models:
            m.eval()
    torch.manual_seed(config.seed if init_seed is None else init_seed)
    student = SegNet(strategy.n_categories, taxonomy.n_classes, widths)
    teacher = frozen_copy(student)
    yt = torch.from_numpy(y)
    idx_all = torch.arange(len(y))

    if oracle:
        masks = oracle_category_masks(y, taxonomy, strategy)
    elif precompute and masks is None:
        masks = category_masks_from_models(models, x)
    if masks is not None:
        stacked = stack_masks(list(masks), strategy, per_channel=per_channel)
        if stacked.shape[:3] != y.shape:
            raise ContractError(f"masks {stacked.shape[:3]} do not match labels {y.shape}")
        pool = to_tensor_images(stacked)
    else:
        pool = None
        xt = to_tensor_images(x)
    sampler = BatchSampler(len(y), config)

    def step_loss(t):
        (idx,) = sampler(idx_all)
        yb = yt[idx]
        if pool is not None:
            xb = pool[idx]
        else:
            masks = [predict_scores(m, xt[idx]).argmax(1).numpy() for m in models]
            xb = to_tensor_images(stack_masks(masks, strategy, per_channel=per_channel))
        return pixel_cross_entropy(student(xb), yb, ignore_id), ()

    losses = run_loop(student, config, step_loss, teacher=teacher, log_path=log_path)
    hashes = [ModelCheckpoint.from_model(m).weights_hash() for m in models]
    manifest = {
        "config_hash": config.hash(),
        "iteration": config.iterations,
        "metrics": _snapshot_metrics(losses),
        "taxonomy_hash": taxonomy.hash(),
        "oracle": oracle,
    }
    student.meta = teacher.meta = {"strategy_hash": strategy.hash(), "category_index": "ensemble"}
    return EnsembleModel(student, teacher, strategy.hash(), hashes, per_channel, manifest)


def fuse(model: EnsembleModel, masks: Sequence, strategy: DivisionStrategy | None = None,
         *, use_student: bool = False) -> np.ndarray:
    """Fuse category masks into global labels with the ensemble network."""
    if strategy is not None:
        model.check_strategy(strategy)
    arrays = _unwrap(masks, strategy)
    if len(arrays) != model.n_categories:
        raise ContractError(f"ensemble expects {model.n_categories} category masks, got {len(arrays)}")
    x = stack_masks(arrays, strategy, per_channel=model.per_channel)
    net = model.student if use_student else model.teacher
    return predict(net, x)


def infer_pipeline(category_models: Sequence[SegNet], ensemble: EnsembleModel, images,
                   strategy: DivisionStrategy | None = None) -> np.ndarray:
    """Predict with every category model, then fuse with the ensemble."""
    for j, m in enumerate(category_models):
        h = m.meta.get("strategy_hash")
        if h is not None and h != ensemble.strategy_hash:
            raise ContractError(
                f"category model {j} strategy {h} does not match ensemble strategy {ensemble.strategy_hash}"
            )
    if strategy is not None:
        _check_category_models(category_models, strategy)
    masks = category_masks_from_models(category_models, images)
    return fuse(ensemble, masks, strategy)
