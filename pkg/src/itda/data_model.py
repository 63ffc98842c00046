"""Dataset containers and per-dimension standardization.

Feature matrices are plain float64 numpy arrays of shape (rows, dim),
validated once on entry through :func:`as_feature_matrix` and frozen
(read-only) afterwards.  The dataset containers below are immutable
dataclasses and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STD_FLOOR = 1e-8

STANDARDIZE_POOLED = "pooled"
STANDARDIZE_PER_DOMAIN = "per-domain"
STANDARDIZE_OFF = "off"
STANDARDIZE_MODES = (STANDARDIZE_POOLED, STANDARDIZE_PER_DOMAIN, STANDARDIZE_OFF)


class DataValidationError(ValueError):
    """Raised when inputs violate a dataset or transform contract."""


def as_feature_matrix(values, name: str = "features") -> np.ndarray:
    """Validate and return a read-only float64 matrix of row vectors.

    Requires a 2-D shape with at least one row and one column and all
    entries finite (no NaN/Inf).
    """
    arr = np.array(values, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2:
        raise DataValidationError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataValidationError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataValidationError(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def _as_label_vector(labels, n_rows: int, num_classes: int) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise DataValidationError(f"labels must be 1-D, got ndim={arr.ndim}")
    if arr.shape[0] != n_rows:
        raise DataValidationError(
            f"labels length {arr.shape[0]} does not match {n_rows} rows"
        )
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise DataValidationError("labels must be integers")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= num_classes:
        raise DataValidationError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{arr.min()}, {arr.max()}]"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SourceDataset:
    """Labeled instances: features (N x D) with one class id per row.

    Every class in {0..num_classes-1} must occur at least once so that
    class posteriors are well defined.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        feats = as_feature_matrix(self.features, "source features")
        object.__setattr__(self, "features", feats)
        if self.num_classes < 1:
            raise DataValidationError("num_classes must be >= 1")
        labels = _as_label_vector(self.labels, feats.shape[0], self.num_classes)
        object.__setattr__(self, "labels", labels)
        counts = np.bincount(labels, minlength=self.num_classes)
        if (counts == 0).any():
            missing = int(np.flatnonzero(counts == 0)[0])
            raise DataValidationError(f"class {missing} has no instances")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True, eq=False)
class TargetDataset:
    """Unlabeled instances: features (M x D)."""

    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "features", as_feature_matrix(self.features, "target features")
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class Transform:
    """A linear map given by a d x D matrix applied as x -> matrix @ x.

    The implied metric on inputs is matrix.T @ matrix, so two transforms
    that differ by a left rotation induce identical distances.
    """

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64, order="C", copy=True)
        if mat.ndim != 2:
            raise DataValidationError(f"transform must be 2-D, got ndim={mat.ndim}")
        d, big_d = mat.shape
        if not 1 <= d <= big_d:
            raise DataValidationError(
                f"transform shape {mat.shape} must satisfy 1 <= out_dim <= in_dim"
            )
        if not np.isfinite(mat).all():
            raise DataValidationError("transform contains NaN or Inf")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    def trace_gram(self) -> float:
        """Trace of matrix.T @ matrix, i.e. the squared Frobenius norm."""
        return float(np.sum(self.matrix * self.matrix))

    def apply(self, features: np.ndarray) -> np.ndarray:
        if features.shape[1] != self.in_dim:
            raise DataValidationError(
                f"feature dim {features.shape[1]} does not match "
                f"transform in_dim {self.in_dim}"
            )
        return features @ self.matrix.T

    @classmethod
    def identity(cls, dim: int) -> "Transform":
        return cls(np.eye(dim))


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Per-column mean and (floored) standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64, copy=True)
        std = np.array(self.std, dtype=np.float64, copy=True)
        if mean.ndim != 1 or std.ndim != 1 or mean.shape != std.shape:
            raise DataValidationError("mean and std must be 1-D vectors of equal length")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise DataValidationError("standardization stats contain NaN or Inf")
        if (std < STD_FLOOR).any():
            raise DataValidationError(f"std entries must be >= {STD_FLOOR}")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_standardizer(features: np.ndarray) -> StandardizationStats:
    """Column means and population standard deviations, std floored at 1e-8.

    Constant columns are floored rather than rejected so datasets with
    dead features pass through unchanged (up to centering).
    """
    feats = as_feature_matrix(features)
    if feats.shape[0] < 2:
        raise DataValidationError("insufficient data: need at least 2 rows")
    mean = feats.mean(axis=0)
    std = np.maximum(feats.std(axis=0), STD_FLOOR)
    return StandardizationStats(mean=mean, std=std)


def apply_standardizer(stats: StandardizationStats, features: np.ndarray) -> np.ndarray:
    """Return (features - mean) / std, column-wise."""
    feats = as_feature_matrix(features)
    if feats.shape[1] != stats.dim:
        raise DataValidationError(
            f"feature dim {feats.shape[1]} does not match stats dim {stats.dim}"
        )
    out = (feats - stats.mean) / stats.std
    out.setflags(write=False)
    return out


def standardize_pair(
    source: SourceDataset,
    target: TargetDataset,
    mode: str = STANDARDIZE_POOLED,
) -> tuple[SourceDataset, TargetDataset]:
    """Standardize both domains per column.

    "pooled" fits one standardizer on the stacked source and target
    features (the default: both domains are assumed to live in a shared
    feature space).  "per-domain" fits each domain separately.  "off"
    returns the inputs unchanged.
    """
    if mode not in STANDARDIZE_MODES:
        raise DataValidationError(
            f"unknown standardization mode {mode!r}; expected one of {STANDARDIZE_MODES}"
        )
    if source.dim != target.dim:
        raise DataValidationError(
            f"source dim {source.dim} does not match target dim {target.dim}"
        )
    if mode == STANDARDIZE_OFF:
        return source, target
    if mode == STANDARDIZE_POOLED:
        stats = fit_standardizer(np.vstack([source.features, target.features]))
        src_stats = tgt_stats = stats
    else:
        src_stats = fit_standardizer(source.features)
        tgt_stats = fit_standardizer(target.features)
    new_source = SourceDataset(
        features=apply_standardizer(src_stats, source.features),
        labels=source.labels,
        num_classes=source.num_classes,
    )
    new_target = TargetDataset(features=apply_standardizer(tgt_stats, target.features))
    return new_source, new_target


def pooled_standardizer(source: SourceDataset, target: TargetDataset) -> StandardizationStats:
    """Standardizer fit on the union of source and target features."""
    return fit_standardizer(np.vstack([source.features, target.features]))
