import numpy as np
import pytest
from PIL import Image

from decseg.datakit import (
    TOY_TARGET_DOMAIN,
    Dataset,
    DomainParams,
    Item,
    ResolutionPolicy,
    SceneSpec,
    compose_sources,
    generate_toy_dataset,
    load_sample,
    read_dataset,
    write_dataset,
)
from decseg.exceptions import ContractError, DataError
from decseg.taxonomy import SemanticClass, ClassTaxonomy, preset_strategy


def _arrays_dataset(n, tag, shape=(8, 8)):
    items = [Item(f"{tag}{i}", np.zeros(shape + (3,), np.uint8), np.zeros(shape, np.uint8), tag)
             for i in range(n)]
    return Dataset(items, source_tag=tag)


def test_compose_counts_and_tags():
    a, b = _arrays_dataset(3, "a"), _arrays_dataset(5, "b")
    both = compose_sources([a, b])
    assert len(both) == 8
    assert both.source_tag == "a+b"
    assert [it.source_tag for it in both.items] == ["a"] * 3 + ["b"] * 5


def test_compose_identity():
    a = _arrays_dataset(3, "a")
    assert compose_sources([a]) is a


def test_compose_rejects_taxonomy_mismatch():
    a = _arrays_dataset(2, "a")
    other = ClassTaxonomy((SemanticClass(0, "x", (0, 0, 0)),))
    b = Dataset(_arrays_dataset(2, "b").items, other, "b")
    with pytest.raises(ContractError, match="taxonomy"):
        compose_sources([a, b])
    with pytest.raises(ContractError):
        compose_sources([])


def test_load_sample_range_error(toy_small):
    with pytest.raises(IndexError):
        load_sample(toy_small, len(toy_small))
    img, label = load_sample(toy_small, 0)
    assert img.dtype == np.float32 and 0 <= img.min() and img.max() <= 1
    assert label.shape == img.shape[:2]


def test_invalid_label_value_is_data_error():
    item = Item("x", np.zeros((4, 4, 3), np.uint8), np.full((4, 4), 40, np.uint8))
    with pytest.raises(DataError, match="40"):
        load_sample(Dataset([item]), 0)


def test_disk_roundtrip_is_bit_identical(tmp_path, toy_small):
    write_dataset(toy_small, tmp_path / "ds")
    back = read_dataset(tmp_path / "ds")
    assert [it.id for it in back.items] == [it.id for it in toy_small.items]
    x0, y0 = toy_small.arrays()
    x1, y1 = back.arrays()
    assert np.array_equal(y0, y1)
    assert np.array_equal(np.round(x0 * 255), np.round(x1 * 255))
    assert back.taxonomy == toy_small.taxonomy


def test_missing_file_reports_path(tmp_path, toy_small):
    write_dataset(toy_small, tmp_path / "ds")
    victim = tmp_path / "ds" / "labels" / f"{toy_small.items[0].id}.png"
    victim.write_bytes(b"not a png")
    ds = read_dataset(tmp_path / "ds")
    with pytest.raises(OSError, match=str(victim.name)):
        load_sample(ds, 0)
    with pytest.raises(OSError, match="manifest"):
        read_dataset(tmp_path / "nowhere")


def test_resize_policy_dims_and_values(rng):
    label = rng.integers(0, 19, size=(128, 256)).astype(np.uint8)
    img = rng.integers(0, 256, size=(128, 256, 3)).astype(np.uint8)
    ds = Dataset([Item("a", img, label)], policy=ResolutionPolicy("resize", (128, 64)))
    x, y = load_sample(ds, 0)
    assert x.shape == (64, 128, 3) and y.shape == (64, 128)
    assert set(np.unique(y)) <= set(np.unique(label))


def test_crop_policy(rng):
    label = rng.integers(0, 19, size=(40, 48)).astype(np.uint8)
    ds = Dataset([Item("a", np.zeros((40, 48, 3), np.uint8), label)], policy=ResolutionPolicy("crop", (32, 32)))
    _, y = load_sample(ds, 0)
    assert np.array_equal(y, label[4:36, 8:40])
    with pytest.raises(ValueError):
        ResolutionPolicy("resize")


def test_label_png_must_be_single_channel(tmp_path):
    Image.new("RGB", (4, 4)).save(tmp_path / "l.png")
    ds = Dataset([Item("a", np.zeros((4, 4, 3), np.uint8), tmp_path / "l.png")])
    with pytest.raises((ValueError, OSError)):
        load_sample(ds, 0)


def test_toy_generation_is_deterministic():
    spec = SceneSpec(32, 32, seed=5)
    a, b = generate_toy_dataset(spec, 3), generate_toy_dataset(spec, 3)
    for ia, ib in zip(a.items, b.items):
        assert ia.image.tobytes() == ib.image.tobytes()
        assert ia.label.tobytes() == ib.label.tobytes()


def test_domain_shift_changes_only_appearance():
    src = generate_toy_dataset(SceneSpec(48, 48, seed=9), 4)
    tgt = generate_toy_dataset(SceneSpec(48, 48, seed=9, domain=TOY_TARGET_DOMAIN), 4)
    for a, b in zip(src.items, tgt.items):
        assert np.array_equal(a.label, b.label)
        assert not np.array_equal(a.image, b.image)


def test_no_foreground_shapes_gives_background_only(tax):
    spec = SceneSpec(32, 32, n_shapes={"Vehicle": (0, 0), "Human/Cycle": (0, 0), "Traffic": (0, 0)}, seed=2)
    _, y = generate_toy_dataset(spec, 5).arrays()
    background = set(preset_strategy("B+V+H+T").categories[0].members)
    assert set(np.unique(y).tolist()) <= background


def test_toy_scenes_contain_every_category(bvht):
    _, y = generate_toy_dataset(SceneSpec(64, 64, seed=0), 20).arrays()
    present = set(np.unique(y).tolist())
    for cat in bvht.categories:
        assert present & set(cat.members), cat.name


@pytest.mark.parametrize("kwargs", [dict(width=0, height=32), dict(width=16, height=32),
                                    dict(n_shapes={"Vehicle": (3, 1)}),
                                    dict(domain=DomainParams(noise_sigma=-1.0))])
def test_bad_spec_is_contract_error(kwargs):
    with pytest.raises(ContractError):
        SceneSpec(**kwargs)


def test_zero_items_is_contract_error():
    with pytest.raises(ContractError):
        generate_toy_dataset(SceneSpec(32, 32), 0)


def test_spec_dict_roundtrip():
    spec = SceneSpec(40, 32, domain=DomainParams(0.1, 5.0, 0.8), seed=4, tag="t")
    assert SceneSpec.from_dict(spec.to_dict()) == spec


def test_without_labels(toy_small):
    bare = toy_small.without_labels()
    assert not bare.has_labels and len(bare) == len(toy_small)
    x, y = bare.arrays()
    assert y is None and x.shape == (8, 32, 32, 3)
