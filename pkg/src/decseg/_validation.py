"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError, DataError
from .taxonomy import ClassTaxonomy


def check_images(X, channels: int = 3) -> np.ndarray:
    """Return ``(N,H,W,C)`` float32 images in [0, 1]; uint8 input is rescaled."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4 or X.shape[-1] != channels:
        raise ContractError(f"expected (N,H,W,{channels}) images, got shape {X.shape}")
    if X.dtype == np.uint8:
        return X.astype(np.float32) / 255.0
    X = X.astype(np.float32)
    if X.size and (X.min() < 0 or X.max() > 1):
        raise DataError("float images must lie in [0, 1]")
    return X


def check_labels(y, taxonomy: ClassTaxonomy, shape=None) -> np.ndarray:
    """Return ``(N,H,W)`` global labels after checking every value is a class id or ignore."""
    y = np.asarray(y)
    if y.ndim == 2:
        y = y[None]
    if y.ndim != 3:
        raise ContractError(f"expected (N,H,W) labels, got shape {y.shape}")
    if shape is not None and y.shape != tuple(shape):
        raise ContractError(f"labels {y.shape} do not match images {tuple(shape)}")
    bad = (y >= taxonomy.n_classes) & (y != taxonomy.ignore_id)
    if bad.any() or (y < 0).any():
        raise DataError(f"label values {np.unique(y[bad | (y < 0)]).tolist()} are not class ids")
    return y


def check_masks(masks, n_categories: int) -> list[np.ndarray]:
    """Accept ``(N,H,W,N_G)`` stacked masks or a list of ``(N,H,W)`` masks."""
    if isinstance(masks, np.ndarray) and masks.ndim in (3, 4) and masks.shape[-1] == n_categories \
            and not (masks.ndim == 3 and len(masks) == n_categories):
        return [masks[..., j] for j in range(n_categories)]
    masks = [np.asarray(m) for m in masks]
    if len(masks) != n_categories:
        raise ContractError(f"expected {n_categories} category masks, got {len(masks)}")
    return masks
