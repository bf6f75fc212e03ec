"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The end-to-end checks train real (small) models on the toy source/target
pair and take roughly half an hour on a single CPU core.
"""

import math
import time

import numpy as np
import pytest
import torch

from decseg.datakit import TOY_TARGET_DOMAIN, SceneSpec, generate_toy_dataset
from decseg.ensemble import fuse, infer_pipeline, oracle_category_masks, stack_masks, train_ensemble
from decseg.evalkit import ConfusionMatrix, accumulate, confusion_from_pairs, iou_report, merge
from decseg.segtrain import (
    PRESETS,
    SegNet,
    TrainConfig,
    count_parameters,
    desk_adapt_config,
    desk_category_config,
    desk_ensemble_config,
    ema_update,
    lr_schedule,
    pixel_cross_entropy,
    predict,
    train_selftrain,
    train_supervised,
)
from decseg.taxonomy import (
    available_presets,
    build_remap_tables,
    cityscapes_taxonomy,
    overlay_fuse,
    preset_strategy,
    remap_label,
)

TAX = cityscapes_taxonomy()
SEEDS = (0, 1, 2)
SIZE = 48
N_TRAIN = 200
N_TEST = 50


@pytest.fixture(scope="module")
def label_corpus():
    _, y = generate_toy_dataset(SceneSpec(64, 64, seed=2024, tag="corpus"), 200, TAX).arrays()
    return y


def test_c01_partition_roundtrip(label_corpus, criterion):
    t0 = time.perf_counter()
    bad = []
    for name in available_presets():
        s = preset_strategy(name, TAX)
        masks = [remap_label(label_corpus, t) for t in build_remap_tables(TAX, s)]
        if not np.array_equal(overlay_fuse(masks, s), label_corpus):
            bad.append(name)
    elapsed = time.perf_counter() - t0
    criterion(1, "partition round-trip", not bad and elapsed < 60,
              f"{len(available_presets())} presets x 200 labels, {elapsed:.1f}s" + (f", failed {bad}" if bad else ""))


def test_c02_exactly_one_vote(label_corpus, criterion):
    bad = []
    keep = label_corpus != TAX.ignore_id
    for name in available_presets():
        s = preset_strategy(name, TAX)
        votes = sum((remap_label(label_corpus, t) != t.other_index).astype(int)
                    for t in build_remap_tables(TAX, s))
        if not np.all(votes[keep] == 1):
            bad.append(name)
    criterion(2, "exactly one vote", not bad, f"{int(keep.sum())} pixels per preset")


def test_c03_miou_oracle_equivalence(criterion):
    rng = np.random.default_rng(3)
    n = TAX.n_classes
    worst = 0.0
    single = ConfusionMatrix.zeros(n)
    shards = [ConfusionMatrix.zeros(n) for _ in range(4)]
    for i in range(100):
        gt = rng.integers(0, n, size=(32, 32))
        gt[rng.random((32, 32)) < 0.1] = TAX.ignore_id
        pred = np.where(rng.random((32, 32)) < 0.5, gt, rng.integers(0, n, size=(32, 32)))
        pred[pred == TAX.ignore_id] = 0
        cm = accumulate(ConfusionMatrix.zeros(n), pred, gt)
        rep = iou_report(cm)
        inter = np.zeros(n)
        union = np.zeros(n)
        for p, g in zip(pred.ravel(), gt.ravel()):
            if g == TAX.ignore_id:
                continue
            if p == g:
                inter[g] += 1
                union[g] += 1
            else:
                union[g] += 1
                union[p] += 1
        brute = [inter[c] / union[c] if union[c] else None for c in range(n)]
        for a, b in zip(rep.iou, brute):
            assert (a is None) == (b is None)
            if a is not None:
                worst = max(worst, abs(a - b))
        defined = [b for b in brute if b is not None]
        worst = max(worst, abs(rep.miou - sum(defined) / len(defined)))
        single = accumulate(single, pred, gt)
        shards[i % 4] = accumulate(shards[i % 4], pred, gt)
    merged = merge(merge(shards[0], shards[1]), merge(shards[2], shards[3]))
    criterion(3, "mIoU oracle equivalence", worst <= 1e-12 and merged == single,
              f"max |diff| {worst:.1e}, shard merge {'equal' if merged == single else 'DIFFERS'}")


def test_c04_ema_geometric(criterion):
    rng = np.random.default_rng(4)
    worst = elementwise = 0.0
    for alpha in (0.5, 0.9, 0.9999):
        student = rng.normal(size=1000)
        teacher0 = rng.normal(size=1000)
        teacher = teacher0.copy()
        for _ in range(10):
            teacher = ema_update(teacher, student, alpha)
        expected = alpha**10 * (teacher0 - student)
        diff = (teacher - student) - expected
        worst = max(worst, float(np.linalg.norm(diff) / np.linalg.norm(expected)))
        elementwise = max(elementwise, float(np.max(np.abs(diff) / np.abs(expected))))
    criterion(4, "EMA geometric decay", worst <= 1e-12,
              f"relative error {worst:.1e} (worst single coordinate {elementwise:.1e})")


def test_c05_schedule_endpoints(criterion):
    cfg = TrainConfig(iterations=1000, base_lr=0.01, warmup_iters=100, poly_power=0.9)
    linear = cfg.replace(poly_power=1.0)
    ok = (lr_schedule(100, cfg) == 0.01 and lr_schedule(1000, cfg) == 0.0
          and lr_schedule(550, linear) == 0.005)
    criterion(5, "schedule endpoints", ok,
              f"lr(w)={lr_schedule(100, cfg)}, lr(N)={lr_schedule(1000, cfg)}, mid={lr_schedule(550, linear)}")


def test_c06_gradient_check(criterion):
    torch.manual_seed(6)
    net = SegNet(3, 5, PRESETS["micro"]).double().train()
    x = torch.rand(2, 3, 8, 8, dtype=torch.float64)
    y = torch.randint(0, 5, (2, 8, 8))
    loss = pixel_cross_entropy(net(x), y)
    net.zero_grad()
    loss.backward()
    eps = 1e-6
    analytic, numeric = [], []
    with torch.no_grad():
        for p in net.parameters():
            flat, grad = p.view(-1), p.grad.view(-1).clone()
            for i in range(0, flat.numel(), max(1, flat.numel() // 4)):
                old = flat[i].item()
                flat[i] = old + eps
                up = pixel_cross_entropy(net(x), y).item()
                flat[i] = old - eps
                down = pixel_cross_entropy(net(x), y).item()
                flat[i] = old
                numeric.append((up - down) / (2 * eps))
                analytic.append(grad[i].item())
    a, n = np.array(analytic), np.array(numeric)
    rel = float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n)))
    ce_err = max(abs(pixel_cross_entropy(torch.zeros(1, k, 4, 4), torch.randint(0, k, (1, 4, 4))).item()
                     - math.log(k)) for k in (2, 5, 9, 19))
    criterion(6, "gradient check and uniform CE", rel <= 1e-4 and ce_err <= 1e-6,
              f"{len(a)} coordinates, relative error {rel:.1e}, CE error {ce_err:.1e}")


def _toy(seed, tag, n, domain=None):
    spec = SceneSpec(SIZE, SIZE, seed=seed, tag=tag, **({"domain": domain} if domain else {}))
    return generate_toy_dataset(spec, n, TAX).arrays()


def _miou(pred, gt, n):
    return iou_report(confusion_from_pairs(pred, gt, n)).miou


def test_c07_oracle_fusion_learnable(criterion):
    s = preset_strategy("B+V+H+T", TAX)
    _, y = _toy(700, "oracle-train", N_TRAIN)
    _, ye = _toy(701, "oracle-test", N_TEST)
    cfg = desk_ensemble_config(3000, seed=7)
    t0 = time.perf_counter()
    ens = train_ensemble(None, (None, y), cfg, s, TAX, oracle=True)
    elapsed = time.perf_counter() - t0
    masks = oracle_category_masks(ye, TAX, s)
    fused = fuse(ens, masks, s)
    miou = _miou(fused, ye, TAX.n_classes)
    agree = float((fused == overlay_fuse(masks, s)).mean())
    ok = miou >= 0.95 and agree >= 0.99 and cfg.iterations <= 3000 and elapsed <= 900
    criterion(7, "oracle fusion learnable", ok,
              f"mIoU {miou:.3f}, agreement {agree:.2%}, {cfg.iterations} steps, {elapsed:.0f}s")


def _run_seed(seed):
    """Source-only and self-trained category/monolithic models plus the ensemble for one seed."""
    s = preset_strategy("B+V+H+T", TAX)
    xs, ys = _toy(100 * seed, "src", N_TRAIN)
    xt, _ = _toy(100 * seed + 1, "tgt", N_TRAIN, TOY_TARGET_DOMAIN)
    xe, ye = _toy(100 * seed + 2, "tst", N_TEST, TOY_TARGET_DOMAIN)
    _, ys_held = _toy(100 * seed + 3, "src-held", N_TEST)
    sl_cfg = desk_category_config(600, seed=seed)
    uda_cfg = desk_adapt_config(300, seed=seed)
    tables = build_remap_tables(TAX, s) + [None]
    out = {"cat_so": [], "cat_st": [], "sl": [], "uda": []}
    for table in tables:
        n = TAX.n_classes if table is None else table.n_out
        gt = ye if table is None else remap_label(ye, table)
        torch.manual_seed(seed)
        model = SegNet(3, n, PRESETS["category"])
        meta = {"strategy_hash": s.hash(), "category_index": "monolithic" if table is None else table.category_index}
        sl = train_supervised(model, (xs, ys), sl_cfg, table=table, manifest=meta).to_model()
        _, teacher = train_selftrain(model, (xs, ys), xt, uda_cfg, table=table, manifest=meta)
        uda = teacher.to_model()
        so_miou, st_miou = _miou(predict(sl, xe), gt, n), _miou(predict(uda, xe), gt, n)
        if table is None:
            out["mono_so"], out["mono_st"], out["mono_pred"] = so_miou, st_miou, predict(uda, xe)
        else:
            out["cat_so"].append(so_miou)
            out["cat_st"].append(st_miou)
            out["sl"].append(sl)
            out["uda"].append(uda)
    ens = train_ensemble(out["sl"], (xs, ys), desk_ensemble_config(1500, seed=seed), s, TAX, precompute=True)
    out["dec_pred"] = infer_pipeline(out["uda"], ens, xe, s)
    out["ensemble"], out["ye"], out["ys_held"], out["strategy"] = ens, ye, ys_held, s
    out["dec"] = _miou(out["dec_pred"], ye, TAX.n_classes)
    out["overlay"] = _miou(overlay_fuse([predict(m, xe) for m in out["uda"]], s), ye, TAX.n_classes)
    return out


@pytest.fixture(scope="session")
def seed_runs():
    return {seed: _run_seed(seed) for seed in SEEDS}


def test_c08_end_to_end_trend(seed_runs, criterion):
    so = np.mean([np.mean(r["cat_so"]) for r in seed_runs.values()])
    st = np.mean([np.mean(r["cat_st"]) for r in seed_runs.values()])
    dec = np.mean([r["dec"] for r in seed_runs.values()])
    mono = np.mean([r["mono_st"] for r in seed_runs.values()])
    overlay = np.mean([r["overlay"] for r in seed_runs.values()])
    for seed, r in seed_runs.items():
        print(f"seed {seed}: category SO {np.mean(r['cat_so']):.3f} ST {np.mean(r['cat_st']):.3f} | "
              f"monolithic SO {r['mono_so']:.3f} ST {r['mono_st']:.3f} | DEC {r['dec']:.3f} overlay {r['overlay']:.3f}")
    foreground = [c for cat in preset_strategy("B+V+H+T", TAX).categories[1:] for c in cat.members]
    dec_cm = sum((confusion_from_pairs(r["dec_pred"], r["ye"], TAX.n_classes) for r in seed_runs.values()),
                 ConfusionMatrix.zeros(TAX.n_classes))
    mono_cm = sum((confusion_from_pairs(r["mono_pred"], r["ye"], TAX.n_classes) for r in seed_runs.values()),
                  ConfusionMatrix.zeros(TAX.n_classes))
    dec_iou, mono_iou = iou_report(dec_cm, TAX).iou, iou_report(mono_cm, TAX).iou
    for c in foreground:
        fmt = lambda v: "  n/a" if v is None else f"{v:.3f}"  # noqa: E731
        print(f"  {TAX.classes[c].name:>14}: DEC {fmt(dec_iou[c])}  monolithic {fmt(mono_iou[c])}")
    ok = st > so and dec >= mono - 0.01
    criterion(8, "end-to-end trend", ok,
              f"category SO {so:.3f} -> ST {st:.3f}; DEC {dec:.3f} vs monolithic ST {mono:.3f} "
              f"(overlay {overlay:.3f}), {len(seed_runs)} seeds")


def test_c09_domain_gap_insulation(seed_runs, criterion):
    gaps = []
    for r in seed_runs.values():
        s, ens = r["strategy"], r["ensemble"]
        src = _miou(fuse(ens, oracle_category_masks(r["ys_held"], TAX, s), s), r["ys_held"], TAX.n_classes)
        tgt = _miou(fuse(ens, oracle_category_masks(r["ye"], TAX, s), s), r["ye"], TAX.n_classes)
        gaps.append(src - tgt)
    gap = float(np.mean(gaps))
    criterion(9, "domain-gap insulation", gap <= 0.02,
              f"source minus target mIoU {gap * 100:+.2f} points (per seed {', '.join(f'{g * 100:+.2f}' for g in gaps)})")


def test_c10_normalization_contract(criterion):
    rng = np.random.default_rng(10)
    presets = available_presets()
    failures = 0
    for case in range(1000):
        s = preset_strategy(presets[case % len(presets)], TAX)
        h, w = rng.integers(1, 12, size=2)
        batch = () if case % 3 else (int(rng.integers(1, 4)),)
        if case % 10 == 0:
            value = int(rng.integers(0, min(s.n_outs)))
            masks = [np.full(batch + (h, w), value) for _ in s.n_outs]
        else:
            masks = [rng.integers(0, n, size=batch + (h, w)) for n in s.n_outs]
        out = stack_masks(masks, s)
        ok = out.min() >= 0 and out.max() <= 1
        if case % 10 == 0:
            ok = ok and not out.any()
        failures += not ok
    criterion(10, "normalization contract", failures == 0, f"1000 fuzz cases, {failures} failures")


def test_c11_bench_inequality(criterion):
    s = preset_strategy("B+V+H+T", TAX)
    ensemble = count_parameters(SegNet(s.n_categories, TAX.n_classes, PRESETS["ensemble"]))
    category = min(count_parameters(SegNet(3, n, PRESETS["category"])) for n in s.n_outs)
    criterion(11, "bench inequality", ensemble < category, f"ensemble {ensemble} < category {category}")
