"""Nearest-neighbor classification and reference baselines.

Target rows are labeled by their single nearest source row in the
transformed space, with equidistant ties going to the lowest source row
index so results are reproducible on quantized features.  The two
baselines shipped here, the identity transform and the target
principal-direction projection, are the no-learning comparisons a
learned transform has to beat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)
from .neighbor_model import projected_sq_dists
from .optimizer import init_target_pca


@dataclass(frozen=True, eq=False)
class PredictionResult:
    """Predicted target labels plus scores when truth was supplied."""

    predicted: np.ndarray
    accuracy: float | None = None
    per_class: np.ndarray | None = None


def knn1_classify(
    transform: Transform, source: SourceDataset, target: TargetDataset
) -> np.ndarray:
    """Label each target row by its nearest source row under L."""
    if source.dim != transform.in_dim or target.dim != transform.in_dim:
        raise DataValidationError(
            f"feature dims (source {source.dim}, target {target.dim}) do not "
            f"match transform in_dim {transform.in_dim}"
        )
    zs = transform.apply(source.features)
    zt = transform.apply(target.features)
    d2 = projected_sq_dists(zt, zs)
    nearest = np.argmin(d2, axis=1)
    return source.labels[nearest]


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of exact label matches."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.ndim != 1 or t.ndim != 1 or p.shape[0] != t.shape[0]:
        raise DataValidationError(
            f"prediction length {p.shape} does not match truth length {t.shape}"
        )
    if p.shape[0] == 0:
        raise DataValidationError("cannot score empty predictions")
    return float(np.mean(p == t))


def per_class_accuracy(
    predicted: np.ndarray, truth: np.ndarray, num_classes: int
) -> np.ndarray:
    """Accuracy within each true class; nan for classes absent from truth."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise DataValidationError(
            f"prediction shape {p.shape} does not match truth shape {t.shape}"
        )
    out = np.full(num_classes, np.nan)
    for c in range(num_classes):
        mask = t == c
        if mask.any():
            out[c] = float(np.mean(p[mask] == c))
    return out


def confusion_counts(
    predicted: np.ndarray, truth: np.ndarray, num_classes: int
) -> np.ndarray:
    """Counts[i, j] = rows with true class i predicted as class j."""
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape:
        raise DataValidationError(
            f"prediction shape {p.shape} does not match truth shape {t.shape}"
        )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return counts


def _scored(
    predicted: np.ndarray, truth: np.ndarray | None, num_classes: int
) -> PredictionResult:
    if truth is None:
        return PredictionResult(predicted=predicted)
    return PredictionResult(
        predicted=predicted,
        accuracy=accuracy(predicted, truth),
        per_class=per_class_accuracy(predicted, truth, num_classes),
    )


def identity_baseline(
    source: SourceDataset, target: TargetDataset, truth: np.ndarray | None = None
) -> PredictionResult:
    """Nearest-neighbor in the raw feature space (no transform learned)."""
    predicted = knn1_classify(Transform.identity(source.dim), source, target)
    return _scored(predicted, truth, source.num_classes)


def pca_baseline(
    source: SourceDataset,
    target: TargetDataset,
    d: int,
    truth: np.ndarray | None = None,
) -> PredictionResult:
    """Nearest-neighbor after projecting onto target principal directions."""
    transform = init_target_pca(target, d)
    predicted = knn1_classify(transform, source, target)
    return _scored(predicted, truth, source.num_classes)
