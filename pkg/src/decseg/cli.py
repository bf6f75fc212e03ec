"""Command line entry point: ``dec validate|toygen|remap|train|infer|eval|bench``.

One YAML run config drives every stage. Outputs live under the config's
``output`` root::

    remap/<source>/cat<j>/<id>.png
    checkpoints/category-sl/cat<j>/           checkpoint + metrics.csv
    checkpoints/category-uda/cat<j>/{student,teacher}/
    checkpoints/ensemble/{student,teacher}/
    checkpoints/monolithic-{sl,uda}/
    manifests/<command>.json                   run manifests
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import torch
from PIL import Image

from . import __version__
from .datakit import (
    Dataset,
    SceneSpec,
    compose_sources,
    generate_toy_dataset,
    read_dataset,
    write_dataset,
)
from .ensemble import EnsembleModel, fuse, train_ensemble
from .evalkit import (
    ConfusionMatrix,
    accumulate,
    bench,
    iou_report,
    plot_report,
    write_bench_csv,
    write_metrics_csv,
    write_summary_csv,
)
from .exceptions import ContractError, PrerequisiteError
from .segtrain import PRESETS, ModelCheckpoint, SegNet, TrainConfig, predict, train_selftrain, train_supervised
from .taxonomy import (
    ClassTaxonomy,
    DivisionStrategy,
    available_presets,
    build_remap_table,
    iter_member_names,
    load_strategy,
    load_structured,
    load_taxonomy,
    overlay_fuse,
    remap_label,
    validate_strategy,
)

log = logging.getLogger("decseg")

STAGES = ("category-sl", "category-uda", "ensemble", "monolithic-sl", "monolithic-uda")


@dataclass
class RunConfig:
    strategy: str = "B+V+H+T"
    sources: list[str] = field(default_factory=list)
    target: str | None = None
    output: str = "runs/dec"
    taxonomy: str | None = None
    ensemble_sources: list[str] | None = None
    seed: int = 0
    category_widths: tuple = PRESETS["category"]
    ensemble_widths: tuple = PRESETS["ensemble"]
    train: dict = field(default_factory=dict)
    precompute_masks: bool = False
    path: Path | None = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        raw = load_structured(path) or {}
        base = path.parent
        known = {"strategy", "sources", "target", "output", "taxonomy", "ensemble_sources", "seed",
                 "category_widths", "ensemble_widths", "train", "precompute_masks"}
        unknown = set(raw) - known
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")

        def rel(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        cfg = cls(
            strategy=str(raw.get("strategy", "B+V+H+T")),
            sources=[rel(s) for s in raw.get("sources", [])],
            target=rel(raw.get("target")),
            output=rel(raw.get("output", "runs/dec")),
            taxonomy=rel(raw.get("taxonomy")),
            ensemble_sources=[rel(s) for s in raw["ensemble_sources"]] if raw.get("ensemble_sources") else None,
            seed=int(raw.get("seed", 0)),
            category_widths=tuple(raw.get("category_widths", PRESETS["category"])),
            ensemble_widths=tuple(raw.get("ensemble_widths", PRESETS["ensemble"])),
            train=dict(raw.get("train", {})),
            precompute_masks=bool(raw.get("precompute_masks", False)),
            path=path,
            raw=raw,
        )
        # strategy may be a file relative to the config
        if cfg.strategy not in available_presets() and (base / cfg.strategy).exists():
            cfg.strategy = str(base / cfg.strategy)
        if "DEC_SEED" in os.environ:
            cfg.seed = int(os.environ["DEC_SEED"])
        for p in cfg.sources + ([cfg.target] if cfg.target else []) + ([cfg.taxonomy] if cfg.taxonomy else []):
            if not Path(p).exists():
                raise click.UsageError(f"path in config does not exist: {p}")
        return cfg

    @property
    def out(self) -> Path:
        return Path(self.output)

    def taxonomy_obj(self) -> ClassTaxonomy:
        return load_taxonomy(self.taxonomy)

    def strategy_obj(self, taxonomy: ClassTaxonomy) -> DivisionStrategy:
        strategy = load_strategy(self.strategy, taxonomy)
        report = validate_strategy(taxonomy, strategy)
        if not report.ok:
            raise ContractError(f"strategy {strategy.name!r} does not partition the taxonomy:\n{report}")
        return strategy

    def train_config(self, stage: str) -> TrainConfig:
        key = {"monolithic-sl": "category-sl", "monolithic-uda": "category-uda"}.get(stage, stage)
        d = dict(self.train.get(key, {}))
        if stage in ("monolithic-sl", "monolithic-uda") and stage in self.train:
            d.update(self.train[stage])
        base = TrainConfig.ensemble_defaults() if key == "ensemble" else TrainConfig()
        cfg = base.replace(**d) if d else base
        return cfg.replace(seed=self.seed)

    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob + str(self.seed).encode()).hexdigest()[:16]


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def write_run_manifest(out: Path, command: str, cfg: RunConfig | None, inputs: dict, extra=None) -> Path:
    """Record what a command consumed so a rerun can be checked for identity."""
    manifest = {
        "command": command,
        "toolkit_version": __version__,
        "config_hash": cfg.hash() if cfg else None,
        "seed": cfg.seed if cfg else None,
        "inputs": {k: v for k, v in sorted(inputs.items())},
        **(extra or {}),
    }
    path = out / "manifests" / f"{command}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _dataset_inputs(roots) -> dict:
    return {str(r): _file_hash(Path(r) / "manifest.yaml") for r in roots if (Path(r) / "manifest.yaml").exists()}


def _source_key(root) -> str:
    return Path(root).name


def _remap_dir(cfg: RunConfig, root, j: int) -> Path:
    return cfg.out / "remap" / _source_key(root) / f"cat{j}"


def _stage_dir(cfg: RunConfig, stage: str, j: int | None = None) -> Path:
    d = cfg.out / "checkpoints" / stage
    return d / f"cat{j}" if j is not None else d


def _category_labels(cfg: RunConfig, j: int) -> tuple[np.ndarray, np.ndarray]:
    images, labels = [], []
    for root in cfg.sources:
        ds = read_dataset(root)
        rdir = _remap_dir(cfg, root, j)
        if not rdir.exists():
            raise PrerequisiteError(
                f"remapped labels for category {j} of {root} not found at {rdir}; run `dec remap` first"
            )
        for i, item in enumerate(ds.items):
            img, _ = ds[i]
            lpath = rdir / f"{item.id}.png"
            if not lpath.exists():
                raise PrerequisiteError(f"missing remapped label {lpath}; rerun `dec remap`")
            images.append(img)
            labels.append(np.asarray(Image.open(lpath)))
    return np.stack(images), np.stack(labels).astype(np.int64)


def _global_sources(roots) -> Dataset:
    ds = compose_sources([read_dataset(r) for r in roots])
    if not ds.has_labels:
        raise ContractError("source datasets must carry labels")
    return ds


def _target_images(cfg: RunConfig) -> np.ndarray:
    if not cfg.target:
        raise PrerequisiteError("config has no `target` dataset; category-uda needs one")
    x, _ = read_dataset(cfg.target).without_labels().arrays()
    return x


def _load_category_model(path: Path) -> SegNet:
    """Teacher if the checkpoint has one, otherwise the plain checkpoint."""
    if (path / "teacher").exists():
        return ModelCheckpoint.load(path / "teacher").to_model()
    return ModelCheckpoint.load(path).to_model()


# -- commands ------------------------------------------------------------------

@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Category-wise segmentation with learned mask fusion."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(exc):
    raise click.ClickException(str(exc)) from exc


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config (YAML).")
@click.option("--strategy", help="Preset name or strategy file (overrides the config).")
@click.option("--taxonomy", type=click.Path(exists=True), help="Taxonomy file.")
def validate(config_path, strategy, taxonomy):
    """Check that a division strategy partitions the taxonomy."""
    cfg = RunConfig.load(config_path) if config_path else None
    tax = load_taxonomy(taxonomy or (cfg.taxonomy if cfg else None))
    ref = strategy or (cfg.strategy if cfg else "B+V+H+T")
    try:
        strat = load_strategy(ref, tax)
    except KeyError as exc:
        _fail(exc)
    report = validate_strategy(tax, strat)
    click.echo(f"strategy {strat.name}: {report}")
    for name, members in iter_member_names(tax, strat):
        click.echo(f"  {name}: {', '.join(members)}")
    if not report.ok:
        sys.exit(1)


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="Scene spec (YAML).")
@click.option("--n", "n_items", type=int, required=True, help="Number of scenes.")
@click.option("--out", type=click.Path(), required=True, help="Dataset directory to write.")
@click.option("--no-labels", is_flag=True, help="Omit labels (unlabelled target split).")
def toygen(spec_path, n_items, out, no_labels):
    """Generate a toy dataset with exact labels."""
    spec = SceneSpec.from_dict(load_structured(spec_path)) if spec_path else SceneSpec()
    try:
        ds = generate_toy_dataset(spec, n_items)
    except ContractError as exc:
        _fail(exc)
    if no_labels:
        ds = ds.without_labels()
    write_dataset(ds, out)
    click.echo(f"wrote {len(ds)} items to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--category", default="all", help="Category index or 'all'.")
def remap(config_path, category):
    """Write per-category label files for every source item."""
    cfg = RunConfig.load(config_path)
    tax = cfg.taxonomy_obj()
    try:
        strat = cfg.strategy_obj(tax)
        cats = range(strat.n_categories) if category == "all" else [int(category)]
        tables = [build_remap_table(tax, strat, j) for j in cats]
    except (ContractError, IndexError, KeyError, ValueError) as exc:
        _fail(exc)
    roots = list(dict.fromkeys(cfg.sources + (cfg.ensemble_sources or [])))
    for root in roots:
        ds = read_dataset(root)
        if not ds.has_labels:
            _fail(ContractError(f"source {root} has no labels"))
        for i, item in enumerate(ds.items):
            _, label = ds[i]
            for table in tables:
                d = _remap_dir(cfg, root, table.category_index)
                d.mkdir(parents=True, exist_ok=True)
                Image.fromarray(remap_label(label, table), mode="L").save(d / f"{item.id}.png")
    write_run_manifest(cfg.out, "remap", cfg, _dataset_inputs(roots),
                       {"strategy_hash": strat.hash(), "categories": list(cats)})
    click.echo(f"remapped {len(roots)} source(s) into {len(tables)} categor{'y' if len(tables) == 1 else 'ies'}")


def run_stage(cfg: RunConfig, stage: str, category: int | None = None) -> Path:
    """Train one stage and return its checkpoint directory."""
    tax = cfg.taxonomy_obj()
    strat = cfg.strategy_obj(tax)
    tcfg = cfg.train_config(stage)
    log.info("training %s%s for %d steps", stage, "" if category is None else f" {category}", tcfg.iterations)
    meta = {"strategy_hash": strat.hash(), "taxonomy_hash": tax.hash()}

    if stage in ("category-sl", "category-uda"):
        if category is None:
            raise click.UsageError(f"stage {stage} needs --category")
        if not 0 <= category < strat.n_categories:
            raise IndexError(f"category {category} out of range [0, {strat.n_categories})")
        x, y = _category_labels(cfg, category)
        meta["category_index"] = category
        out = _stage_dir(cfg, stage, category)
        n_out = strat.n_outs[category]
        if stage == "category-sl":
            torch.manual_seed(cfg.seed)
            model = SegNet(3, n_out, cfg.category_widths)
            ckpt = train_supervised(model, (x, y), tcfg, log_path=out / "metrics.csv", manifest=meta)
            ckpt.save(out)
        else:
            sl = _stage_dir(cfg, "category-sl", category)
            if not (sl / "manifest.json").exists():
                raise PrerequisiteError(f"category-uda {category} starts from category-sl {category}; "
                                        f"train it first (`dec train --stage category-sl --category {category}`)")
            model = ModelCheckpoint.load(sl).to_model()
            student, teacher = train_selftrain(model, (x, y), _target_images(cfg), tcfg,
                                               log_path=out / "metrics.csv", manifest=meta)
            student.save(out / "student")
            teacher.save(out / "teacher")
        return out
    if stage in ("monolithic-sl", "monolithic-uda"):
        x, y = _global_sources(cfg.sources).arrays()
        meta["category_index"] = "monolithic"
        out = _stage_dir(cfg, stage)
        if stage == "monolithic-sl":
            torch.manual_seed(cfg.seed)
            model = SegNet(3, tax.n_classes, cfg.category_widths)
            train_supervised(model, (x, y), tcfg, log_path=out / "metrics.csv", manifest=meta).save(out)
        else:
            sl = _stage_dir(cfg, "monolithic-sl")
            if not (sl / "manifest.json").exists():
                raise PrerequisiteError("monolithic-uda starts from monolithic-sl; train it first")
            model = ModelCheckpoint.load(sl).to_model()
            student, teacher = train_selftrain(model, (x, y), _target_images(cfg), tcfg,
                                               log_path=out / "metrics.csv", manifest=meta)
            student.save(out / "student")
            teacher.save(out / "teacher")
        return out
    if stage == "ensemble":
        models = []
        for j in range(strat.n_categories):
            d = _stage_dir(cfg, "category-sl", j)
            if not (d / "manifest.json").exists():
                raise PrerequisiteError(
                    f"ensemble needs source category models; category-sl {j} is missing ({d}). "
                    f"Run `dec train --stage category-sl --category {j}`"
                )
            models.append(ModelCheckpoint.load(d).to_model())
        src = _global_sources(cfg.ensemble_sources or cfg.sources)
        out = _stage_dir(cfg, "ensemble")
        ens = train_ensemble(models, src, tcfg, strat, tax, precompute=cfg.precompute_masks,
                             widths=cfg.ensemble_widths, log_path=out / "metrics.csv")
        ens.save(out)
        return out
    raise click.UsageError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)} or all")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--stage", required=True, type=click.Choice(STAGES + ("all",)))
@click.option("--category", type=int, help="Category index for category stages.")
def train(config_path, stage, category):
    """Train a stage: category-sl, category-uda, ensemble, monolithic-sl/uda, or all."""
    cfg = RunConfig.load(config_path)
    tax = cfg.taxonomy_obj()
    try:
        strat = cfg.strategy_obj(tax)
        if stage == "all":
            plan = [("category-sl", j) for j in range(strat.n_categories)]
            if cfg.target:
                plan += [("category-uda", j) for j in range(strat.n_categories)]
            plan.append(("ensemble", None))
        elif stage.startswith("category-") and category is None:
            plan = [(stage, j) for j in range(strat.n_categories)]
        else:
            plan = [(stage, category)]
        outs = []
        for st, j in plan:
            outs.append(run_stage(cfg, st, j))
            click.echo(f"{st}{'' if j is None else f' {j}'}: {outs[-1]}")
    except (PrerequisiteError, ContractError, IndexError) as exc:
        _fail(exc)
    roots = cfg.sources + ([cfg.target] if cfg.target else [])
    write_run_manifest(cfg.out, f"train-{stage}" + ("" if category is None else f"-{category}"), cfg,
                       _dataset_inputs(roots), {"strategy_hash": strat.hash(),
                                                "checkpoints": [str(o) for o in outs]})


def _list_images(path: Path) -> dict[str, Path]:
    if (path / "manifest.yaml").exists():
        ds = read_dataset(path)
        return {it.id: Path(it.image) for it in ds.items}
    files = sorted(p for ext in ("png", "jpg", "jpeg") for p in path.glob(f"*.{ext}"))
    return {p.stem: p for p in files}


def _list_labels(path: Path) -> dict[str, Path]:
    if (path / "labels").is_dir():
        path = path / "labels"
    return {p.stem: p for p in sorted(path.glob("*.png"))}


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--images", type=click.Path(exists=True), help="Dataset root or directory of images.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--fuser", type=click.Choice(["ensemble", "overlay"]), default="ensemble")
@click.option("--models", "model_stage", type=click.Choice(["category-uda", "category-sl", "monolithic-uda",
                                                             "monolithic-sl"]), default="category-uda",
              help="Which trained models segment the images.")
@click.option("--masks-from-dir", type=click.Path(exists=True),
              help="Fuse precomputed category masks (<dir>/cat<j>/<id>.png) instead of running models.")
@click.option("--color", is_flag=True, help="Also write colour renders.")
def infer(config_path, images, out, fuser, model_stage, masks_from_dir, color):
    """Segment images with category models and fuse the category masks."""
    cfg = RunConfig.load(config_path)
    tax = cfg.taxonomy_obj()
    strat = cfg.strategy_obj(tax)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ensemble = None
    try:
        if fuser == "ensemble" and not model_stage.startswith("monolithic"):
            edir = _stage_dir(cfg, "ensemble")
            if not (edir / "teacher").exists():
                raise PrerequisiteError(f"no ensemble checkpoint at {edir}; run `dec train --stage ensemble`")
            ensemble = EnsembleModel.load(edir)
            ensemble.check_strategy(strat)
        inputs: dict[str, str] = {}
        if masks_from_dir:
            mdir = Path(masks_from_dir)
            ids = sorted(p.stem for p in (mdir / "cat0").glob("*.png"))
            if not ids:
                raise ContractError(f"no masks under {mdir / 'cat0'}")

            def masks_for(item_id):
                return [np.asarray(Image.open(mdir / f"cat{j}" / f"{item_id}.png")) for j in range(strat.n_categories)]
            work = [(i, None) for i in ids]
            models = None
            inputs = {str(p): _file_hash(p) for j in range(strat.n_categories)
                      for p in sorted((mdir / f"cat{j}").glob("*.png"))}
        else:
            if images is None:
                raise click.UsageError("--images is required unless --masks-from-dir is given")
            files = _list_images(Path(images))
            work = list(files.items())
            if model_stage.startswith("monolithic"):
                models = [_load_category_model(_stage_dir(cfg, model_stage))]
            else:
                models = []
                for j in range(strat.n_categories):
                    d = _stage_dir(cfg, model_stage, j)
                    if not (d / "manifest.json").exists() and not (d / "teacher").exists():
                        raise PrerequisiteError(f"{model_stage} {j} checkpoint missing at {d}")
                    m = _load_category_model(d)
                    if m.meta.get("strategy_hash") not in (None, strat.hash()):
                        raise ContractError(f"{d} was trained for a different strategy")
                    models.append(m)
            inputs = {str(p): _file_hash(p) for _, p in work}
        palette = tax.palette()
        for item_id, path in work:
            if models is None:
                masks = masks_for(item_id)
            else:
                img = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0
                masks = [predict(m, img) for m in models]
            if model_stage.startswith("monolithic") and models is not None:
                label = masks[0]
            elif fuser == "overlay":
                label = overlay_fuse(masks, strat)
            else:
                label = fuse(ensemble, masks, strat)
            Image.fromarray(label.astype(np.uint8), mode="L").save(out / f"{item_id}.png")
            if color:
                (out / "color").mkdir(exist_ok=True)
                Image.fromarray(palette[label]).save(out / "color" / f"{item_id}.png")
    except (PrerequisiteError, ContractError, OSError) as exc:
        _fail(exc)
    write_run_manifest(cfg.out, "infer", cfg, inputs,
                       {"fuser": fuser, "models": model_stage, "strategy_hash": strat.hash(), "out": str(out)})
    click.echo(f"wrote {len(work)} label file(s) to {out}")


def evaluate_dirs(pred_dir: Path, gt_dir: Path, taxonomy: ClassTaxonomy, zero_union="exclude"):
    preds, gts = _list_labels(pred_dir), _list_labels(gt_dir)
    common = sorted(set(preds) & set(gts))
    if not common:
        raise ContractError(f"no matching label files between {pred_dir} and {gt_dir}")
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        raise ContractError(f"unmatched files: {', '.join(unmatched[:20])}"
                            + (" ..." if len(unmatched) > 20 else ""))
    cm = ConfusionMatrix.zeros(taxonomy.n_classes)
    for k in common:
        cm = accumulate(cm, np.asarray(Image.open(preds[k])), np.asarray(Image.open(gts[k])),
                        taxonomy.ignore_id)
    return iou_report(cm, taxonomy, zero_union), len(common)


@main.command(name="eval")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config (for the taxonomy).")
@click.option("--pred", "pred_dir", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--zero-union", type=click.Choice(["exclude", "zero"]), default="exclude")
@click.option("--plot", is_flag=True, help="Also render a per-class IoU bar chart.")
def eval_cmd(config_path, pred_dir, gt_dir, out, zero_union, plot):
    """Per-class IoU and mIoU of predicted label files against ground truth."""
    cfg = RunConfig.load(config_path) if config_path else None
    tax = cfg.taxonomy_obj() if cfg else load_taxonomy(None)
    try:
        report, n = evaluate_dirs(Path(pred_dir), Path(gt_dir), tax, zero_union)
    except ContractError as exc:
        _fail(exc)
    out = Path(out)
    write_metrics_csv(report, out / "metrics.csv")
    write_summary_csv(report, n, out / "summary.csv")
    if plot:
        plot_report(report, out / "iou.png")
    inputs = {str(p): _file_hash(p) for d in (pred_dir, gt_dir) for p in sorted(_list_labels(Path(d)).values())}
    write_run_manifest(out, "eval", cfg, {"files": hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()[:16]},
                       {"miou": report.miou, "images": n})
    click.echo(f"mIoU {report.miou:.4f} over {n} image(s)")


@main.command(name="bench")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Run config; trained checkpoints are used when present.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--size", default="64x64", help="Input HxW.")
@click.option("--repetitions", type=int, default=5)
@click.option("--batch-size", type=int, default=1)
def bench_cmd(config_path, out, size, repetitions, batch_size):
    """Parameter counts and throughput of the category and ensemble networks."""
    h, w = (int(v) for v in size.lower().split("x"))
    cfg = RunConfig.load(config_path) if config_path else None
    tax = cfg.taxonomy_obj() if cfg else load_taxonomy(None)
    strat = cfg.strategy_obj(tax) if cfg else load_strategy("B+V+H+T", tax)
    cw = cfg.category_widths if cfg else PRESETS["category"]
    ew = cfg.ensemble_widths if cfg else PRESETS["ensemble"]
    nets = [(f"category{j}", SegNet(3, n, cw)) for j, n in enumerate(strat.n_outs)]
    nets.append(("ensemble", SegNet(strat.n_categories, tax.n_classes, ew)))
    try:
        results = [bench(net, (h, w), repetitions, batch_size, name) for name, net in nets]
    except ContractError as exc:
        _fail(exc)
    write_bench_csv(results, Path(out) / "bench.csv")
    for r in results:
        click.echo(f"{r.model}: {r.params} params, {r.imgs_per_s:.1f} img/s")


if __name__ == "__main__":
    main()
