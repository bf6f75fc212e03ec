"""Datasets on disk and in memory, multi-source composition, toy scene generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .exceptions import ContractError, DataError
from .taxonomy import (
    ClassTaxonomy,
    cityscapes_taxonomy,
    dump_structured,
    load_structured,
    load_taxonomy,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Item:
    """One sample. ``image``/``label`` are file paths or in-memory arrays."""

    id: str
    image: object
    label: object = None
    source_tag: str = ""


@dataclass(frozen=True)
class ResolutionPolicy:
    mode: str = "none"  # none | resize | crop
    size: tuple[int, int] | None = None  # (width, height)

    def __post_init__(self):
        if self.mode not in ("none", "resize", "crop"):
            raise ValueError(f"unknown resolution mode {self.mode!r}")
        if self.mode != "none" and self.size is None:
            raise ValueError(f"{self.mode} policy needs a size")


@dataclass
class Dataset:
    items: list[Item]
    taxonomy: ClassTaxonomy = field(default_factory=cityscapes_taxonomy)
    source_tag: str = ""
    policy: ResolutionPolicy = field(default_factory=ResolutionPolicy)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index: int):
        return load_sample(self, index)

    @property
    def has_labels(self) -> bool:
        return all(it.label is not None for it in self.items)

    def arrays(self) -> tuple[np.ndarray, np.ndarray | None]:
        """Load everything into ``(N,H,W,3) float32`` images and ``(N,H,W) uint8`` labels."""
        images, labels = [], []
        for i in range(len(self)):
            img, lab = load_sample(self, i)
            images.append(img)
            labels.append(lab)
        x = np.stack(images).astype(np.float32)
        if any(lab is None for lab in labels):
            return x, None
        return x, np.stack(labels)

    def without_labels(self) -> "Dataset":
        items = [replace(it, label=None) for it in self.items]
        return Dataset(items, self.taxonomy, self.source_tag, self.policy)


def compose_sources(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate labelled sources that share one taxonomy, keeping per-item tags."""
    if not datasets:
        raise ContractError("compose_sources needs at least one dataset")
    if len(datasets) == 1:
        return datasets[0]
    tax = datasets[0].taxonomy
    for d in datasets[1:]:
        if d.taxonomy != tax:
            raise ContractError(f"taxonomy mismatch between {datasets[0].source_tag!r} and {d.source_tag!r}")
    items = []
    for d in datasets:
        tag = d.source_tag
        items.extend(it if it.source_tag else replace(it, source_tag=tag) for it in d.items)
    tag = "+".join(d.source_tag for d in datasets)
    return Dataset(items, tax, tag, datasets[0].policy)


def _read_image(ref) -> np.ndarray:
    if isinstance(ref, np.ndarray):
        return ref
    try:
        with Image.open(ref) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {ref}: {exc}") from exc


def _read_label(ref) -> np.ndarray:
    if isinstance(ref, np.ndarray):
        return ref
    try:
        with Image.open(ref) as im:
            if im.mode not in ("L", "P", "I", "I;16"):
                raise ValueError(f"label must be single-channel, got mode {im.mode}")
            return np.asarray(im)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read label {ref}: {exc}") from exc


def _to_unit(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float32) / 255.0
    return np.clip(img.astype(np.float32), 0.0, 1.0)


def _resize_image(img: np.ndarray, size) -> np.ndarray:
    w, h = size
    if img.shape[1] == w and img.shape[0] == h:
        return img
    chans = [
        np.asarray(Image.fromarray(img[..., c].astype(np.float32), mode="F").resize((w, h), Image.BILINEAR))
        for c in range(img.shape[2])
    ]
    return np.stack(chans, axis=-1)


def _resize_label(label: np.ndarray, size) -> np.ndarray:
    w, h = size
    if label.shape[1] == w and label.shape[0] == h:
        return label
    return np.asarray(Image.fromarray(label.astype(np.uint8)).resize((w, h), Image.NEAREST))


def _center_crop(arr: np.ndarray, size) -> np.ndarray:
    w, h = size
    H, W = arr.shape[:2]
    if w > W or h > H:
        raise ContractError(f"crop {w}x{h} larger than item {W}x{H}")
    top, left = (H - h) // 2, (W - w) // 2
    return arr[top : top + h, left : left + w]


def validate_label(label: np.ndarray, taxonomy: ClassTaxonomy) -> np.ndarray:
    label = np.asarray(label)
    bad = (label >= taxonomy.n_classes) & (label != taxonomy.ignore_id)
    if np.any(bad) or np.any(label < 0):
        vals = np.unique(label[bad | (label < 0)])
        raise DataError(f"label values {vals.tolist()} are not valid class ids")
    return label


def load_sample(dataset: Dataset, index: int):
    """Decode item ``index``: a ``(H,W,3)`` float image in [0,1] and its label or None."""
    if not 0 <= index < len(dataset):
        raise IndexError(f"index {index} out of range for dataset of length {len(dataset)}")
    item = dataset.items[index]
    img = _to_unit(_read_image(item.image))
    label = None
    if item.label is not None:
        label = validate_label(_read_label(item.label), dataset.taxonomy)
        if label.shape != img.shape[:2]:
            raise DataError(f"item {item.id}: label {label.shape} vs image {img.shape[:2]}")
    pol = dataset.policy
    if pol.mode == "resize":
        img = _resize_image(img, pol.size)
        if label is not None:
            label = _resize_label(label, pol.size)
    elif pol.mode == "crop":
        img = _center_crop(img, pol.size)
        if label is not None:
            label = _center_crop(label, pol.size)
    return np.clip(img, 0.0, 1.0).astype(np.float32), label


# -- on-disk layout ---------------------------------------------------------

def write_dataset(dataset: Dataset, root, taxonomy_path=None) -> Path:
    """Write ``images/<id>.png``, ``labels/<id>.png`` and a ``manifest.yaml``."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    if dataset.has_labels:
        (root / "labels").mkdir(exist_ok=True)
    if taxonomy_path is None:
        taxonomy_path = root / "taxonomy.yaml"
        dump_structured(dataset.taxonomy.to_dict(), taxonomy_path)
    for i, item in enumerate(dataset.items):
        img, label = load_sample(dataset, i)
        Image.fromarray(np.round(img * 255).astype(np.uint8)).save(root / "images" / f"{item.id}.png")
        if label is not None:
            Image.fromarray(label.astype(np.uint8), mode="L").save(root / "labels" / f"{item.id}.png")
    manifest = {
        "taxonomy": str(Path(taxonomy_path).resolve().relative_to(root.resolve()))
        if Path(taxonomy_path).resolve().is_relative_to(root.resolve())
        else str(Path(taxonomy_path).resolve()),
        "source_tag": dataset.source_tag,
        "items": [it.id for it in dataset.items],
    }
    dump_structured(manifest, root / "manifest.yaml")
    return root


def read_dataset(root, policy: ResolutionPolicy | None = None) -> Dataset:
    root = Path(root)
    mpath = root / "manifest.yaml"
    if not mpath.exists():
        raise OSError(f"dataset manifest not found: {mpath}")
    manifest = load_structured(mpath)
    tpath = manifest.get("taxonomy")
    taxonomy = load_taxonomy(root / tpath if tpath and not Path(tpath).is_absolute() else tpath)
    items = []
    for item_id in manifest["items"]:
        matches = sorted((root / "images").glob(f"{item_id}.*"))
        if not matches:
            raise OSError(f"image for item {item_id!r} not found under {root / 'images'}")
        lpath = root / "labels" / f"{item_id}.png"
        items.append(Item(str(item_id), matches[0], lpath if lpath.exists() else None, manifest.get("source_tag", "")))
    return Dataset(items, taxonomy, manifest.get("source_tag", ""), policy or ResolutionPolicy())


# -- toy scenes -------------------------------------------------------------

@dataclass(frozen=True)
class DomainParams:
    noise_sigma: float = 0.0
    hue_shift: float = 0.0  # degrees
    brightness: float = 1.0


# Mild shift that source-only models handle imperfectly but self-training can recover.
TOY_TARGET_DOMAIN = DomainParams(noise_sigma=0.04, hue_shift=10.0, brightness=0.9)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 64
    n_shapes: dict = field(
        default_factory=lambda: {"Vehicle": (1, 3), "Human/Cycle": (1, 3), "Traffic": (1, 2)}
    )
    shape_size: tuple[int, int] = (6, 20)
    domain: DomainParams = field(default_factory=DomainParams)
    seed: int = 0
    tag: str = "toy"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ContractError(f"zero-area canvas {self.width}x{self.height}")
        if self.width < 32 or self.height < 32:
            raise ContractError(f"canvas must be at least 32x32, got {self.width}x{self.height}")
        for k, (lo, hi) in self.n_shapes.items():
            if lo < 0 or hi < lo:
                raise ContractError(f"bad shape count range for {k!r}: {(lo, hi)}")
        if self.domain.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if "domain" in d:
            d["domain"] = DomainParams(**d["domain"])
        if "n_shapes" in d:
            d["n_shapes"] = {k: tuple(v) if isinstance(v, (list, tuple)) else (int(v), int(v))
                             for k, v in d["n_shapes"].items()}
        if "shape_size" in d:
            d["shape_size"] = tuple(d["shape_size"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "n_shapes": {k: list(v) for k, v in self.n_shapes.items()},
            "shape_size": list(self.shape_size),
            "domain": vars(self.domain).copy(),
            "seed": self.seed,
            "tag": self.tag,
        }


# Foreground classes per category with their silhouette kind and aspect (w/h).
_FOREGROUND = {
    "Vehicle": (("car", "rect", 1.8), ("truck", "rect", 1.3), ("bus", "rect", 2.4), ("train", "rect", 3.5)),
    "Human/Cycle": (("person", "ellipse", 0.4), ("rider", "ellipse", 0.55),
                    ("motorcycle", "ellipse", 1.6), ("bicycle", "ring", 1.5)),
    "Traffic": (("pole", "bar", 0.12), ("traffic light", "rect", 0.45), ("traffic sign", "triangle", 1.0)),
}
_PAINT_ORDER = ("Vehicle", "Human/Cycle", "Traffic")


def _class_texture(cid: int) -> tuple[float, float]:
    """Per-class (stripe period, amplitude) so classes differ beyond flat colour."""
    return 3.0 + (cid * 7) % 5, 0.04 + 0.02 * (cid % 3)


def _paint_background(label, rng, tax: ClassTaxonomy):
    H, W = label.shape
    r = tax.resolve
    horizon = int(rng.uniform(0.35, 0.5) * H)
    label[:horizon] = r("sky")
    # buildings / vegetation / wall / fence blocks standing on the horizon
    x = 0
    while x < W:
        w = int(rng.integers(max(4, W // 8), max(5, W // 3)))
        kind = rng.choice(["building", "vegetation", "building", "wall", "fence"])
        top = horizon - int(rng.uniform(0.15, 0.35) * H)
        if kind in ("wall", "fence"):
            top = horizon - int(rng.uniform(0.06, 0.12) * H)
        label[max(top, 0):horizon, x : x + w] = r(kind)
        x += w
    # ground: sidewalk strips at the sides, road in the middle, terrain patches
    yy, xx = np.mgrid[0:H, 0:W]
    ground = yy >= horizon
    label[ground] = r("sidewalk")
    depth = (yy - horizon) / max(H - horizon, 1)
    half = (0.15 + 0.35 * depth) * W * rng.uniform(0.8, 1.1)
    cx = W * rng.uniform(0.4, 0.6)
    label[ground & (np.abs(xx - cx) < half)] = r("road")
    for _ in range(int(rng.integers(1, 3))):
        tx = int(rng.integers(0, W))
        tw = int(rng.integers(W // 10, W // 4))
        ty = int(rng.integers(horizon, H))
        th = int(rng.integers(2, max(3, (H - horizon) // 3)))
        patch = (np.abs(xx - tx) < tw) & (yy >= ty) & (yy < ty + th) & ground
        patch &= np.abs(xx - cx) >= half
        label[patch] = r("terrain")


def _shape_mask(kind, cx, cy, w, h, shape):
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W]
    dx, dy = (xx - cx) / max(w / 2, 0.5), (yy - cy) / max(h / 2, 0.5)
    if kind == "rect" or kind == "bar":
        return (np.abs(dx) <= 1) & (np.abs(dy) <= 1)
    if kind == "ellipse":
        return dx**2 + dy**2 <= 1
    if kind == "ring":
        d = dx**2 + dy**2
        return (d <= 1) & (d >= 0.3)
    if kind == "triangle":
        return (dy <= 1) & (dy >= -1) & (np.abs(dx) <= (dy + 1) / 2)
    raise ValueError(kind)


def _paint_foreground(label, rng, spec: SceneSpec, tax: ClassTaxonomy):
    H, W = label.shape
    lo_size, hi_size = spec.shape_size
    for cat in _PAINT_ORDER:
        lo, hi = spec.n_shapes.get(cat, (0, 0))
        n = int(rng.integers(lo, hi + 1))
        for _ in range(n):
            name, kind, aspect = _FOREGROUND[cat][int(rng.integers(len(_FOREGROUND[cat])))]
            size = rng.uniform(lo_size, hi_size)
            if aspect >= 1:
                w, h = size, size / aspect
            else:
                w, h = size * aspect, size
            if kind == "bar":
                h = size * 1.6
                w = max(2.0, size * aspect)
            w, h = max(w, 2.0), max(h, 2.0)
            cx = rng.uniform(0, W)
            cy = rng.uniform(0.35 * H, 0.95 * H)
            label[_shape_mask(kind, cx, cy, w, h, label.shape)] = tax.resolve(name)


def _render(label: np.ndarray, tax: ClassTaxonomy, rng) -> np.ndarray:
    """Class-coloured, lightly textured clean image in [0,1]."""
    H, W = label.shape
    palette = tax.palette().astype(np.float32) / 255.0
    safe = np.where(label == tax.ignore_id, 0, label)
    img = palette[safe]
    yy, xx = np.mgrid[0:H, 0:W]
    shade = np.zeros((H, W), np.float32)
    for cid in np.unique(safe):
        period, amp = _class_texture(int(cid))
        m = safe == cid
        shade[m] = amp * np.sin(2 * np.pi * (xx[m] + yy[m]) / period)
    img = img + shade[..., None]
    img = img + rng.normal(0, 0.02, size=(1, 1, 3)).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def apply_domain(img: np.ndarray, domain: DomainParams, rng) -> np.ndarray:
    """Appearance-only shift: hue rotation, brightness scale, additive noise, clamp."""
    out = img.astype(np.float32)
    if domain.hue_shift:
        out = _rotate_hue(out, domain.hue_shift)
    if domain.brightness != 1.0:
        out = out * domain.brightness
    if domain.noise_sigma > 0:
        out = out + rng.normal(0.0, domain.noise_sigma, size=out.shape).astype(np.float32)
    return np.clip(out, 0.0, 1.0)


def _rotate_hue(img: np.ndarray, degrees: float) -> np.ndarray:
    # Rotation about the grey axis in RGB space.
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    k = 1.0 / 3.0
    sq = np.sqrt(k)
    m = np.array(
        [
            [c + (1 - c) * k, k * (1 - c) - sq * s, k * (1 - c) + sq * s],
            [k * (1 - c) + sq * s, c + k * (1 - c), k * (1 - c) - sq * s],
            [k * (1 - c) - sq * s, k * (1 - c) + sq * s, c + k * (1 - c)],
        ],
        dtype=np.float32,
    )
    return img @ m.T


def generate_toy_item(spec: SceneSpec, index: int, taxonomy: ClassTaxonomy | None = None):
    """Image (uint8 RGB) and label (uint8) for one toy scene."""
    tax = taxonomy or cityscapes_taxonomy()
    geo_seq, app_seq = np.random.SeedSequence([spec.seed, index]).spawn(2)
    geo = np.random.default_rng(geo_seq)
    label = np.zeros((spec.height, spec.width), dtype=np.uint8)
    _paint_background(label, geo, tax)
    _paint_foreground(label, geo, spec, tax)
    # the clean rendering shares the geometry stream so only the domain differs
    clean = _render(label, tax, geo)
    img = apply_domain(clean, spec.domain, np.random.default_rng(app_seq))
    return np.round(img * 255).astype(np.uint8), label


def generate_toy_dataset(spec: SceneSpec, n_items: int, taxonomy: ClassTaxonomy | None = None) -> Dataset:
    """Deterministic in-memory toy dataset; labels are exact by construction."""
    if n_items < 1:
        raise ContractError(f"n_items must be >= 1, got {n_items}")
    tax = taxonomy or cityscapes_taxonomy()
    items = []
    for i in range(n_items):
        img, label = generate_toy_item(spec, i, tax)
        items.append(Item(f"{spec.tag}_{i:05d}", img, label, spec.tag))
    return Dataset(items, tax, spec.tag)

