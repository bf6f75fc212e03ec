"""scikit-learn style estimators over the functional core.

``CategoryRemapper`` turns global labels into per-category labels and back,
``CategorySegmenter`` trains one category (or monolithic) model,
``EnsembleFuser`` learns to fuse category masks, and ``DECSegmenter`` runs
the whole divide / ensemble / conquer workflow.
"""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_images, check_labels, check_masks
from .ensemble import fuse, stack_masks, train_ensemble
from .evalkit import confusion_from_pairs, iou_report
from .exceptions import ContractError
from .segtrain import PRESETS, SegNet, TrainConfig, predict, train_selftrain, train_supervised
from .taxonomy import (
    ClassTaxonomy,
    DivisionStrategy,
    build_remap_table,
    build_remap_tables,
    cityscapes_taxonomy,
    load_strategy,
    overlay_fuse,
    remap_label,
    validate_strategy,
)


def _resolve(strategy, taxonomy) -> tuple[DivisionStrategy, ClassTaxonomy]:
    taxonomy = taxonomy if taxonomy is not None else cityscapes_taxonomy()
    if not isinstance(strategy, DivisionStrategy):
        strategy = load_strategy(strategy, taxonomy)
    report = validate_strategy(taxonomy, strategy)
    if not report.ok:
        raise ContractError(f"invalid strategy {strategy.name!r}:\n{report}")
    return strategy, taxonomy


def _config(config, default: TrainConfig, seed) -> TrainConfig:
    if config is None:
        config = default
    elif isinstance(config, dict):
        config = TrainConfig.from_dict(config)
    return config.replace(seed=seed) if seed is not None else config


class CategoryRemapper(TransformerMixin, BaseEstimator):
    """Global labels to stacked category labels ``(N,H,W,N_G)``.

    ``inverse_transform`` fuses category masks back by overlay painting.
    """

    def __init__(self, strategy="B+V+H+T", taxonomy=None):
        self.strategy = strategy
        self.taxonomy = taxonomy

    def fit(self, y=None, _unused=None):
        self.strategy_, self.taxonomy_ = _resolve(self.strategy, self.taxonomy)
        self.tables_ = build_remap_tables(self.taxonomy_, self.strategy_)
        self.n_categories_ = len(self.tables_)
        return self

    def transform(self, y):
        check_is_fitted(self, "tables_")
        y = np.asarray(y)
        return np.stack([remap_label(y, t) for t in self.tables_], axis=-1)

    def inverse_transform(self, masks):
        check_is_fitted(self, "tables_")
        return overlay_fuse(check_masks(masks, self.n_categories_), self.strategy_)


class CategorySegmenter(BaseEstimator):
    """Segmentation model for one category of a strategy, or all classes.

    With ``category=None`` the model is monolithic over the taxonomy. When
    ``fit`` receives ``X_target``, the supervised model is further adapted
    by mean-teacher self-training and the teacher is used for prediction;
    the supervised model stays available as ``source_model_``.
    """

    def __init__(self, category=None, strategy="B+V+H+T", taxonomy=None,
                 widths=PRESETS["category"], config=None, adapt_config=None, random_state=0):
        self.category = category
        self.strategy = strategy
        self.taxonomy = taxonomy
        self.widths = widths
        self.config = config
        self.adapt_config = adapt_config
        self.random_state = random_state

    def fit(self, X, y, X_target=None):
        strategy, taxonomy = _resolve(self.strategy, self.taxonomy)
        X = check_images(X)
        y = check_labels(y, taxonomy, X.shape[:3])
        table = None if self.category is None else build_remap_table(taxonomy, strategy, self.category)
        n_out = taxonomy.n_classes if table is None else table.n_out
        config = _config(self.config, TrainConfig(), self.random_state)
        torch.manual_seed(self.random_state)
        model = SegNet(3, n_out, tuple(self.widths))
        meta = {"strategy_hash": strategy.hash(), "taxonomy_hash": taxonomy.hash(),
                "category_index": "monolithic" if table is None else int(self.category)}
        model.meta = dict(meta)
        self.source_checkpoint_ = train_supervised(model, (X, y), config, table=table, manifest=meta)
        self.source_model_ = self.source_checkpoint_.to_model()
        self.model_ = self.source_model_
        self.checkpoint_ = self.source_checkpoint_
        if X_target is not None:
            adapt = _config(self.adapt_config, config.replace(warmup_iters=0), self.random_state)
            _, teacher = train_selftrain(model, (X, y), check_images(X_target), adapt,
                                         table=table, manifest=meta)
            self.checkpoint_ = teacher
            self.model_ = teacher.to_model()
        self.strategy_, self.taxonomy_, self.table_, self.n_out_ = strategy, taxonomy, table, n_out
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, check_images(X))

    def score(self, X, y):
        """mIoU in the model's own label space."""
        check_is_fitted(self, "model_")
        y = np.asarray(y)
        if self.table_ is not None:
            y = remap_label(y, self.table_)
        return iou_report(confusion_from_pairs(self.predict(X), y, self.n_out_)).miou


class EnsembleFuser(BaseEstimator):
    """Learned fusion of category masks into global labels."""

    def __init__(self, strategy="B+V+H+T", taxonomy=None, widths=PRESETS["ensemble"],
                 config=None, per_channel=False, random_state=0):
        self.strategy = strategy
        self.taxonomy = taxonomy
        self.widths = widths
        self.config = config
        self.per_channel = per_channel
        self.random_state = random_state

    def fit(self, masks, y):
        """``masks``: ``(N,H,W,N_G)`` category masks or one ``(N,H,W)`` array per category."""
        strategy, taxonomy = _resolve(self.strategy, self.taxonomy)
        masks = check_masks(masks, strategy.n_categories)
        y = check_labels(y, taxonomy, masks[0].shape)
        config = _config(self.config, TrainConfig.ensemble_defaults(), self.random_state)
        self.ensemble_ = train_ensemble(None, (None, y), config, strategy, taxonomy,
                                        masks=masks, per_channel=self.per_channel,
                                        widths=tuple(self.widths), init_seed=self.random_state)
        self.strategy_, self.taxonomy_ = strategy, taxonomy
        return self

    def transform(self, masks):
        """The normalized pseudo-images the network consumes."""
        check_is_fitted(self, "ensemble_")
        return stack_masks(check_masks(masks, self.strategy_.n_categories), self.strategy_,
                           per_channel=self.per_channel)

    def predict(self, masks):
        check_is_fitted(self, "ensemble_")
        return fuse(self.ensemble_, check_masks(masks, self.strategy_.n_categories), self.strategy_)

    def score(self, masks, y):
        return iou_report(confusion_from_pairs(self.predict(masks), y, self.taxonomy_.n_classes)).miou


class DECSegmenter(BaseEstimator):
    """Category models per strategy category plus an ensemble fuser.

    ``fit`` trains every category model supervised on the source, adapts it
    to ``X_target`` when given, then trains the fuser on the masks that the
    supervised source models predict for the source images. ``predict``
    segments with the (adapted) category models and fuses with the ensemble,
    or by overlay painting when ``fuser="overlay"``.
    """

    def __init__(self, strategy="B+V+H+T", taxonomy=None, category_widths=PRESETS["category"],
                 ensemble_widths=PRESETS["ensemble"], category_config=None, adapt_config=None,
                 ensemble_config=None, fuser="ensemble", random_state=0):
        self.strategy = strategy
        self.taxonomy = taxonomy
        self.category_widths = category_widths
        self.ensemble_widths = ensemble_widths
        self.category_config = category_config
        self.adapt_config = adapt_config
        self.ensemble_config = ensemble_config
        self.fuser = fuser
        self.random_state = random_state

    def fit(self, X, y, X_target=None):
        strategy, taxonomy = _resolve(self.strategy, self.taxonomy)
        X = check_images(X)
        y = check_labels(y, taxonomy, X.shape[:3])
        self.category_models_ = []
        for j in range(strategy.n_categories):
            seg = CategorySegmenter(j, strategy, taxonomy, self.category_widths, self.category_config,
                                    self.adapt_config, self.random_state)
            self.category_models_.append(seg.fit(X, y, X_target))
        source_masks = [predict(seg.source_model_, X) for seg in self.category_models_]
        self.fuser_ = EnsembleFuser(strategy, taxonomy, self.ensemble_widths, self.ensemble_config,
                                    random_state=self.random_state).fit(source_masks, y)
        self.strategy_, self.taxonomy_ = strategy, taxonomy
        return self

    def category_masks(self, X):
        check_is_fitted(self, "fuser_")
        return [seg.predict(X) for seg in self.category_models_]

    def predict(self, X, fuser=None):
        masks = self.category_masks(X)
        if (fuser or self.fuser) == "overlay":
            return overlay_fuse(masks, self.strategy_)
        return self.fuser_.predict(masks)

    def score(self, X, y, fuser=None):
        return iou_report(confusion_from_pairs(self.predict(X, fuser), y, self.taxonomy_.n_classes)).miou
