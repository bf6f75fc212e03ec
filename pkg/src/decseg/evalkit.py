"""Confusion-matrix IoU metrics, CSV reports and model benchmarking."""

from __future__ import annotations

import csv
import resource
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ContractError
from .taxonomy import IGNORE_ID, ClassTaxonomy


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground-truth classes, columns predicted classes."""

    counts: np.ndarray

    @classmethod
    def zeros(cls, n_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other):
        return merge(self, other)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def accumulate(cm: ConfusionMatrix, pred, gt, ignore_id: int = IGNORE_ID) -> ConfusionMatrix:
    """Add one prediction/ground-truth pair; ignored ground-truth pixels are skipped."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ContractError(f"pred {pred.shape} and gt {gt.shape} differ in shape")
    n = cm.n_classes
    if np.any(pred == ignore_id):
        raise ContractError("prediction contains the ignore id")
    if pred.size and (pred.min() < 0 or pred.max() >= n):
        raise ContractError(f"prediction values must lie in [0, {n - 1}]")
    keep = gt != ignore_id
    g = gt[keep].astype(np.int64)
    if g.size and (g.min() < 0 or g.max() >= n):
        raise ContractError(f"ground-truth values must lie in [0, {n - 1}] or equal {ignore_id}")
    p = pred[keep].astype(np.int64)
    counts = np.bincount(g * n + p, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(cm.counts + counts)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    if a.counts.shape != b.counts.shape:
        raise ContractError(f"cannot merge {a.n_classes}- and {b.n_classes}-class matrices")
    return ConfusionMatrix(a.counts + b.counts)


def confusion_from_pairs(preds, gts, n_classes: int, ignore_id: int = IGNORE_ID) -> ConfusionMatrix:
    cm = ConfusionMatrix.zeros(n_classes)
    for p, g in zip(preds, gts):
        cm = accumulate(cm, p, g, ignore_id)
    return cm


@dataclass(frozen=True)
class IoUReport:
    names: list[str]
    iou: list[float | None]  # None when the class has zero union
    miou: float
    pixels: int

    @property
    def defined(self) -> list[bool]:
        return [v is not None for v in self.iou]

    def as_dict(self) -> dict:
        return {n: v for n, v in zip(self.names, self.iou)}


def iou_report(cm: ConfusionMatrix, taxonomy: ClassTaxonomy | None = None,
               zero_union: str = "exclude") -> IoUReport:
    """Per-class IoU and their mean.

    A class that never occurs in ground truth or prediction has zero union;
    with ``zero_union="exclude"`` it is reported as undefined and left out
    of the mean, with ``"zero"`` it counts as 0.0.
    """
    if zero_union not in ("exclude", "zero"):
        raise ValueError(f"zero_union must be 'exclude' or 'zero', got {zero_union!r}")
    c = cm.counts.astype(np.float64)
    inter = np.diag(c)
    union = c.sum(1) + c.sum(0) - inter
    ious: list[float | None] = []
    for i, u in zip(inter, union):
        if u > 0:
            ious.append(float(i / u))
        else:
            ious.append(None if zero_union == "exclude" else 0.0)
    vals = [v for v in ious if v is not None]
    miou = float(np.mean(vals)) if vals else float("nan")
    names = taxonomy.names if taxonomy is not None else [str(i) for i in range(cm.n_classes)]
    return IoUReport(names, ious, miou, cm.total)


def write_metrics_csv(report: IoUReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "name", "iou", "defined"])
        for i, (name, v) in enumerate(zip(report.names, report.iou)):
            w.writerow([i, name, "" if v is None else f"{v:.6f}", int(v is not None)])
        w.writerow(["miou", "mIoU", f"{report.miou:.6f}", 1])
    return path


def write_summary_csv(report: IoUReport, n_images: int, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["miou", "pixels", "images"])
        w.writerow([f"{report.miou:.6f}", report.pixels, n_images])
    return path


def plot_report(report: IoUReport, path, title: str = "per-class IoU") -> Path:
    """Bar chart of per-class IoU, written to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    vals = [0.0 if v is None else v for v in report.iou]
    fig, ax = plt.subplots(figsize=(max(6, 0.4 * len(vals)), 3.5))
    bars = ax.bar(range(len(vals)), vals, color="tab:blue")
    for b, v in zip(bars, report.iou):
        if v is None:
            b.set_color("lightgrey")
    ax.set_xticks(range(len(vals)), report.names, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_title(f"{title} (mIoU {report.miou:.3f})")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


@dataclass(frozen=True)
class BenchResult:
    model: str
    params: int
    imgs_per_s: float
    peak_memory_mb: float | None


def bench(model, input_dims: Sequence[int], repetitions: int = 5, batch_size: int = 1,
          name: str = "model") -> BenchResult:
    """Parameter count and inference throughput.

    ``input_dims`` is ``(height, width)``; channels come from the model. The
    first timed repetition is discarded as warmup.
    """
    import torch

    from .segtrain.nets import count_parameters

    if repetitions < 3:
        raise ContractError("repetitions must be >= 3")
    h, w = input_dims
    x = torch.rand(batch_size, model.in_channels, h, w)
    model.check_input(x)
    was_training = model.training
    model.eval()
    times = []
    try:
        with torch.no_grad():
            for _ in range(repetitions):
                t0 = time.perf_counter()
                model(x)
                times.append(time.perf_counter() - t0)
    finally:
        model.train(was_training)
    elapsed = sum(times[1:])
    imgs = batch_size * (repetitions - 1)
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    return BenchResult(name, count_parameters(model), imgs / elapsed if elapsed > 0 else float("inf"), peak)


def write_bench_csv(results: Sequence[BenchResult], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "params", "imgs_per_s", "peak_memory_mb"])
        for r in results:
            w.writerow([r.model, r.params, f"{r.imgs_per_s:.3f}",
                        "" if r.peak_memory_mb is None else f"{r.peak_memory_mb:.1f}"])
    return path
