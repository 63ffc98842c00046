"""Shared dataset factories for the test suite."""

from __future__ import annotations

import numpy as np

from itda.data_model import SourceDataset, TargetDataset, Transform


def random_pair(
    n: int = 12,
    m: int = 9,
    dim: int = 4,
    num_classes: int = 3,
    seed: int = 0,
    scale: float = 1.0,
) -> tuple[SourceDataset, TargetDataset]:
    """Gaussian source/target pair with every class populated.

    Labels cycle through the classes, so ``n >= 2 * num_classes`` gives
    at least two rows per class (enough for leave-one-out scoring).
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    source = SourceDataset(rng.normal(size=(n, dim)) * scale, labels, num_classes)
    target = TargetDataset(rng.normal(size=(m, dim)) * scale)
    return source, target


def random_transform(out_dim: int, in_dim: int, seed: int = 0, scale: float = 1.0) -> Transform:
    rng = np.random.default_rng(seed)
    return Transform(rng.normal(size=(out_dim, in_dim)) * scale)


def random_rotation(dim: int, seed: int = 0) -> np.ndarray:
    """Orthogonal matrix with determinant +1."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
