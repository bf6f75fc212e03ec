"""Class taxonomy, division strategies and category label remapping.

A division strategy partitions the global classes into ordered categories.
Each category gets its own label space: member classes keep their position
in the member list and every other class collapses onto one trailing
"other category" index.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .exceptions import ContractError, DataError

IGNORE_ID = 255

# Cityscapes evaluation classes with their conventional train ids and palette.
CITYSCAPES_CLASSES = (
    ("road", (128, 64, 128)),
    ("sidewalk", (244, 35, 232)),
    ("building", (70, 70, 70)),
    ("wall", (102, 102, 156)),
    ("fence", (190, 153, 153)),
    ("pole", (153, 153, 153)),
    ("traffic light", (250, 170, 30)),
    ("traffic sign", (220, 220, 0)),
    ("vegetation", (107, 142, 35)),
    ("terrain", (152, 251, 152)),
    ("sky", (70, 130, 180)),
    ("person", (220, 20, 60)),
    ("rider", (255, 0, 0)),
    ("car", (0, 0, 142)),
    ("truck", (0, 0, 70)),
    ("bus", (0, 60, 100)),
    ("train", (0, 80, 100)),
    ("motorcycle", (0, 0, 230)),
    ("bicycle", (119, 11, 32)),
)


@dataclass(frozen=True)
class SemanticClass:
    id: int
    name: str
    color: tuple[int, int, int] = (0, 0, 0)


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered global class set plus the reserved ignore id."""

    classes: tuple[SemanticClass, ...]
    ignore_id: int = IGNORE_ID

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        ids = [c.id for c in self.classes]
        if sorted(ids) != list(range(len(ids))):
            raise ContractError(f"class ids must be unique and contiguous from 0, got {ids}")
        names = [c.name for c in self.classes]
        if any(not n for n in names) or len(set(names)) != len(names):
            raise ContractError("class names must be unique and non-empty")
        if 0 <= self.ignore_id < len(ids):
            raise ContractError(f"ignore_id {self.ignore_id} collides with a class id")
        object.__setattr__(self, "classes", tuple(sorted(self.classes, key=lambda c: c.id)))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.classes]

    def palette(self) -> np.ndarray:
        return np.array([c.color for c in self.classes], dtype=np.uint8)

    def resolve(self, ref) -> int:
        """Map a class name or id to its id."""
        if isinstance(ref, (int, np.integer)) and not isinstance(ref, bool):
            return int(ref)
        key = str(ref).strip().lower()
        for c in self.classes:
            if c.name.lower() == key:
                return c.id
        raise KeyError(f"unknown class {ref!r}")

    def to_dict(self) -> dict:
        return {
            "classes": [{"id": c.id, "name": c.name, "color": list(c.color)} for c in self.classes],
            "ignore_id": self.ignore_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassTaxonomy":
        classes = [SemanticClass(int(c["id"]), str(c["name"]), tuple(c.get("color", (0, 0, 0))))
                   for c in d["classes"]]
        return cls(tuple(classes), int(d.get("ignore_id", IGNORE_ID)))

    def hash(self) -> str:
        return _digest(self.to_dict())


def cityscapes_taxonomy(ignore_id: int = IGNORE_ID) -> ClassTaxonomy:
    """The 19-class evaluation taxonomy with ids in conventional order."""
    return ClassTaxonomy(
        tuple(SemanticClass(i, n, c) for i, (n, c) in enumerate(CITYSCAPES_CLASSES)), ignore_id
    )


@dataclass(frozen=True)
class Category:
    name: str
    members: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))


@dataclass(frozen=True)
class DivisionStrategy:
    name: str
    categories: tuple[Category, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_outs(self) -> list[int]:
        return [len(c.members) + 1 for c in self.categories]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "categories": [{"name": c.name, "members": list(c.members)} for c in self.categories],
        }

    @classmethod
    def from_dict(cls, d: dict, taxonomy: ClassTaxonomy | None = None) -> "DivisionStrategy":
        taxonomy = taxonomy or cityscapes_taxonomy()
        cats = tuple(
            Category(str(c["name"]), tuple(taxonomy.resolve(m) for m in c["members"]))
            for c in d["categories"]
        )
        return cls(str(d.get("name", "custom")), cats)

    def hash(self) -> str:
        # Names are cosmetic; only the ordered partition decides compatibility.
        return _digest([list(c.members) for c in self.categories])


@dataclass(frozen=True)
class RemapTable:
    """Total lookup from global ids (and ignore) to one category's label space."""

    category_index: int
    lookup: np.ndarray = field(repr=False)
    n_out: int
    other_index: int
    ignore_id: int = IGNORE_ID

    def __call__(self, label: np.ndarray) -> np.ndarray:
        return remap_label(label, self)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(self.violations)


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def validate_strategy(taxonomy: ClassTaxonomy, strategy: DivisionStrategy) -> ValidationReport:
    """Check that the strategy partitions the taxonomy.

    Violations are returned as data, each prefixed with its kind
    ("duplicate id", "missing id", "unknown id", "empty category").
    """
    report = ValidationReport()
    if not strategy.categories:
        report.violations.append("empty category: strategy has no categories")
    valid = set(range(taxonomy.n_classes))
    seen: dict[int, str] = {}
    for cat in strategy.categories:
        if not cat.members:
            report.violations.append(f"empty category: {cat.name!r}")
        for m in cat.members:
            if m not in valid:
                report.violations.append(f"unknown id: {m} in category {cat.name!r}")
            elif m in seen:
                report.violations.append(
                    f"duplicate id: {m} ({taxonomy.classes[m].name}) in {seen[m]!r} and {cat.name!r}"
                )
            else:
                seen[m] = cat.name
    for m in sorted(valid - set(seen)):
        report.violations.append(f"missing id: {m} ({taxonomy.classes[m].name})")
    return report


def _check_valid(taxonomy, strategy):
    report = validate_strategy(taxonomy, strategy)
    if not report.ok:
        raise ContractError(f"invalid strategy {strategy.name!r}:\n{report}")


def build_remap_table(
    taxonomy: ClassTaxonomy, strategy: DivisionStrategy, category_index: int
) -> RemapTable:
    """Lookup table sending category members to their position, the rest to other."""
    _check_valid(taxonomy, strategy)
    if not 0 <= category_index < strategy.n_categories:
        raise IndexError(
            f"category_index {category_index} out of range [0, {strategy.n_categories})"
        )
    members = strategy.categories[category_index].members
    n_out = len(members) + 1
    other = n_out - 1
    size = max(taxonomy.n_classes, taxonomy.ignore_id + 1)
    # -1 marks ids outside the domain of the lookup.
    lookup = np.full(size, -1, dtype=np.int64)
    lookup[: taxonomy.n_classes] = other
    lookup[list(members)] = np.arange(len(members))
    lookup[taxonomy.ignore_id] = taxonomy.ignore_id
    lookup.setflags(write=False)
    return RemapTable(category_index, lookup, n_out, other, taxonomy.ignore_id)


def build_remap_tables(taxonomy: ClassTaxonomy, strategy: DivisionStrategy) -> list[RemapTable]:
    return [build_remap_table(taxonomy, strategy, j) for j in range(strategy.n_categories)]


def remap_label(label: np.ndarray, table: RemapTable) -> np.ndarray:
    """Apply a remap table to every pixel of a global label mask."""
    label = np.asarray(label)
    if label.size:
        lo, hi = int(label.min()), int(label.max())
        if lo < 0 or hi >= table.lookup.size:
            bad = lo if lo < 0 else hi
            raise DataError(f"label value {bad} outside the remap domain")
    out = table.lookup[label.astype(np.int64, copy=False)]
    if out.size and out.min() < 0:
        bad = np.unique(label[out < 0])
        raise DataError(f"label value(s) {bad.tolist()} outside the remap domain")
    dtype = np.uint8 if table.ignore_id < 256 else np.int32
    return out.astype(dtype)


def overlay_fuse(
    masks: Sequence[np.ndarray], strategy: DivisionStrategy, fallback: int | None = None
) -> np.ndarray:
    """Paint category predictions in strategy order; later categories win.

    Pixels where every category votes "other" get ``fallback``, by default
    the first member of the first category.
    """
    if len(masks) != strategy.n_categories:
        raise ContractError(
            f"expected {strategy.n_categories} category masks, got {len(masks)}"
        )
    masks = [np.asarray(m) for m in masks]
    shape = masks[0].shape
    for j, m in enumerate(masks):
        if m.shape != shape:
            raise ContractError(f"mask {j} has shape {m.shape}, expected {shape}")
    if fallback is None:
        fallback = strategy.categories[0].members[0]
    out = np.full(shape, fallback, dtype=np.uint8)
    for cat, m in zip(strategy.categories, masks):
        other = len(cat.members)
        hit = m != other
        if not hit.any():
            continue
        vals = m[hit].astype(np.int64)
        if vals.min() < 0 or vals.max() > other:
            raise ContractError(f"category {cat.name!r} mask has values outside [0, {other}]")
        out[hit] = np.asarray(cat.members, dtype=np.uint8)[vals]
    return out


# The four standard categories, in the paint order used throughout (B, V, H, T).
_FOUR_CATEGORIES = (
    ("B", "Background", ("road", "sidewalk", "building", "wall", "fence", "vegetation", "terrain", "sky")),
    ("V", "Vehicle", ("car", "truck", "bus", "train")),
    ("H", "Human/Cycle", ("person", "rider", "motorcycle", "bicycle")),
    ("T", "Traffic", ("traffic light", "traffic sign", "pole")),
)

_RANDOM = {
    "random-1": (
        ("pole", "train", "terrain", "traffic light", "truck", "bicycle", "road", "wall"),
        ("motorcycle", "sky", "person", "building"),
        ("vegetation", "traffic sign", "sidewalk", "fence"),
        ("bus", "rider", "car"),
    ),
    "random-2": (
        ("bicycle", "traffic sign", "person", "fence", "truck", "sidewalk", "car", "traffic light"),
        ("rider", "pole", "building", "terrain"),
        ("bus", "motorcycle", "wall", "train"),
        ("road", "vegetation", "sky"),
    ),
    "random-3": (
        ("motorcycle", "pole", "bus", "traffic sign", "sky", "terrain", "sidewalk", "fence"),
        ("car", "train", "truck", "wall"),
        ("person", "traffic light", "rider", "building"),
        ("vegetation", "bicycle", "road"),
    ),
    "random-4": (
        ("rider", "traffic light", "motorcycle", "car", "truck", "traffic sign", "pole", "vegetation"),
        ("wall", "road", "bicycle", "sky"),
        ("bus", "person", "train", "building"),
        ("sidewalk", "fence", "terrain"),
    ),
}

MERGED_PRESETS = (
    "B+V+H+T", "BV+HT", "BT+VH", "B+V+HT", "B+VT+H", "BV+H+T", "BT+V+H", "BVT+H",
)


def available_presets() -> list[str]:
    return list(MERGED_PRESETS) + sorted(_RANDOM)


def preset_strategy(name: str, taxonomy: ClassTaxonomy | None = None) -> DivisionStrategy:
    """Return a named strategy: the four-category grouping, a merge of it, or a random one.

    Merged names join category letters (B, V, H, T) with ``+``; each group's
    member list is the concatenation of its categories in B, V, H, T order.
    """
    taxonomy = taxonomy or cityscapes_taxonomy()
    if name in _RANDOM:
        cats = tuple(
            Category(f"group-{i + 1}", tuple(taxonomy.resolve(n) for n in names))
            for i, names in enumerate(_RANDOM[name])
        )
        return DivisionStrategy(name, cats)
    if name not in MERGED_PRESETS:
        raise KeyError(f"unknown strategy preset {name!r}; available: {', '.join(available_presets())}")
    by_letter = {letter: (full, members) for letter, full, members in _FOUR_CATEGORIES}
    cats = []
    for group in name.split("+"):
        letters = [letter for letter, _, _ in _FOUR_CATEGORIES if letter in group]
        members = [taxonomy.resolve(m) for letter in letters for m in by_letter[letter][1]]
        label = by_letter[group][0] if len(group) == 1 else group
        cats.append(Category(label, tuple(members)))
    return DivisionStrategy(name, tuple(cats))


def load_structured(path) -> dict:
    """Read a YAML (or JSON, which is valid YAML) document."""
    with open(path) as fh:
        return yaml.safe_load(fh)


def load_taxonomy(path=None) -> ClassTaxonomy:
    if path is None:
        return cityscapes_taxonomy()
    return ClassTaxonomy.from_dict(load_structured(path))


def load_strategy(ref: str | Path, taxonomy: ClassTaxonomy | None = None) -> DivisionStrategy:
    """Resolve a preset name or a strategy file path."""
    taxonomy = taxonomy or cityscapes_taxonomy()
    if str(ref) in available_presets():
        return preset_strategy(str(ref), taxonomy)
    path = Path(ref)
    if not path.exists():
        raise KeyError(
            f"{ref!r} is neither a strategy file nor a preset; presets: {', '.join(available_presets())}"
        )
    return DivisionStrategy.from_dict(load_structured(path), taxonomy)


def dump_structured(obj, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(obj, fh, sort_keys=False)


def iter_member_names(taxonomy: ClassTaxonomy, strategy: DivisionStrategy) -> Iterable[tuple[str, list[str]]]:
    """``(category name, member class names)`` in strategy order; unknown ids are skipped."""
    for c in strategy.categories:
        yield c.name, [taxonomy.classes[m].name for m in c.members if 0 <= m < taxonomy.n_classes]
