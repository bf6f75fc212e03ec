import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from decseg.ensemble import oracle_category_masks
from decseg.estimators import CategoryRemapper, CategorySegmenter, DECSegmenter, EnsembleFuser
from decseg.exceptions import ContractError, DataError
from decseg.segtrain import PRESETS

TINY = {"iterations": 3, "warmup_iters": 0, "batch_size": 2}


def test_remapper_roundtrip(toy_small):
    _, y = toy_small.arrays()
    r = CategoryRemapper("BV+HT").fit()
    stacked = r.transform(y)
    assert stacked.shape == y.shape + (2,)
    assert np.array_equal(r.inverse_transform(stacked), y)
    assert np.array_equal(r.inverse_transform([stacked[..., 0], stacked[..., 1]]), y)


def test_remapper_params_and_clone():
    r = CategoryRemapper("B+V+H+T")
    assert r.get_params() == {"strategy": "B+V+H+T", "taxonomy": None}
    c = clone(r).set_params(strategy="random-2")
    assert c.strategy == "random-2" and r.strategy == "B+V+H+T"
    with pytest.raises(NotFittedError):
        c.transform(np.zeros((2, 2)))
    with pytest.raises(KeyError):
        CategoryRemapper("nonsense").fit()


def test_category_segmenter(toy_small):
    x, y = toy_small.arrays()
    seg = CategorySegmenter(category=1, widths=PRESETS["micro"], config=TINY)
    seg.fit(x, y)
    pred = seg.predict(x)
    assert pred.shape == y.shape and pred.max() <= 4
    assert seg.n_out_ == 5 and seg.model_ is seg.source_model_
    assert 0.0 <= seg.score(x, y) <= 1.0
    assert seg.checkpoint_.manifest["category_index"] == 1


def test_category_segmenter_adapts(toy_small):
    x, y = toy_small.arrays()
    seg = CategorySegmenter(None, widths=PRESETS["micro"], config=TINY, adapt_config=TINY)
    seg.fit(x, y, X_target=(x * 255).astype(np.uint8))
    assert seg.model_ is not seg.source_model_
    assert seg.checkpoint_.manifest["role"] == "teacher"
    assert seg.predict(x).max() <= 18


def test_input_validation(toy_small):
    x, y = toy_small.arrays()
    seg = CategorySegmenter(0, widths=PRESETS["micro"], config=TINY)
    with pytest.raises(ContractError):
        seg.fit(x[..., :2], y)
    with pytest.raises(ContractError):
        seg.fit(x, y[:3])
    with pytest.raises(DataError):
        seg.fit(x * 2, y)
    bad = y.copy()
    bad[0, 0, 0] = 77
    with pytest.raises(DataError, match="77"):
        seg.fit(x, bad)


def test_fuser_on_oracle_masks(toy_small, tax, bvht):
    _, y = toy_small.arrays()
    masks = np.stack(oracle_category_masks(y, tax, bvht), axis=-1)
    fuser = EnsembleFuser(config={**TINY, "optimizer": "adamw"}).fit(masks, y)
    z = fuser.transform(masks)
    assert z.shape == masks.shape and z.min() == 0 and z.max() == 1
    assert fuser.predict(masks).shape == y.shape
    assert 0 <= fuser.score(masks, y) <= 1
    with pytest.raises(ContractError):
        fuser.predict(masks[..., :3])


def test_dec_segmenter_end_to_end(toy_small):
    x, y = toy_small.arrays()
    dec = DECSegmenter("BV+HT", category_widths=PRESETS["micro"], ensemble_widths=PRESETS["micro"],
                       category_config=TINY, adapt_config=TINY, ensemble_config=TINY)
    dec.fit(x, y, X_target=x)
    assert len(dec.category_models_) == 2
    for fuser in ("ensemble", "overlay"):
        out = dec.predict(x, fuser=fuser)
        assert out.shape == y.shape and out.max() <= 18
    assert 0 <= dec.score(x, y) <= 1
    assert clone(dec).get_params()["strategy"] == "BV+HT"
