"""Two-domain synthetic benchmark with controllable shift and noise.

Class centers sit at the vertices of a regular simplex in a small
signal subspace, so every pair of classes is equally separated.  The
target domain sees the same centers rotated within the signal plane and
translated by a fixed magnitude, modeling a geometric domain shift,
while both domains share fresh isotropic cluster noise.  Extra noise
dimensions carry domain-independent high-variance Gaussians: distances
there make the domains look alike without helping classification, which
is exactly the trap a learned transform must avoid.

``assumption_report`` quantifies the two geometric premises the method
relies on, in any transformed space: SEPARATION (classes form tight,
distinct clusters) and ALIGNMENT (same-class clusters from the two
domains are close).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)


@dataclass(frozen=True)
class SyntheticConfig:
    """Benchmark geometry; defaults give a moderately hard instance."""

    num_classes: int = 3
    signal_dim: int = 5
    noise_dim: int = 15
    points_per_class: int = 40
    cluster_std: float = 0.5
    class_separation: float = 4.0
    rotation_angle: float = math.pi / 6
    translation: float = 1.0
    noise_std: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise DataValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.signal_dim < self.num_classes - 1:
            raise DataValidationError(
                f"signal_dim must be >= num_classes - 1 = {self.num_classes - 1} "
                f"to place the class simplex, got {self.signal_dim}"
            )
        if self.rotation_angle != 0.0 and self.signal_dim < 2:
            raise DataValidationError("rotation needs signal_dim >= 2")
        if self.noise_dim < 0:
            raise DataValidationError(f"noise_dim must be >= 0, got {self.noise_dim}")
        if self.points_per_class < 1:
            raise DataValidationError(
                f"points_per_class must be >= 1, got {self.points_per_class}"
            )
        for name in ("cluster_std", "class_separation", "noise_std"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise DataValidationError(f"{name} must be finite and > 0, got {value}")
        if not (math.isfinite(self.translation) and self.translation >= 0.0):
            raise DataValidationError(
                f"translation must be finite and >= 0, got {self.translation}"
            )
        if not math.isfinite(self.rotation_angle):
            raise DataValidationError("rotation_angle must be finite")
        if self.seed < 0:
            raise DataValidationError(f"seed must be >= 0, got {self.seed}")

    @property
    def dim(self) -> int:
        return self.signal_dim + self.noise_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise DataValidationError(f"unknown config fields: {sorted(extra)}")
        return cls(**data)


def _simplex_coords(num_classes: int, separation: float) -> np.ndarray:
    """Regular simplex vertices, (C x C-1), pairwise distance = separation."""
    centered = np.eye(num_classes) - 1.0 / num_classes
    u, s, _ = np.linalg.svd(centered)
    coords = u[:, : num_classes - 1] * s[: num_classes - 1]
    return coords * (separation / math.sqrt(2.0))


def class_centers(config: SyntheticConfig) -> tuple[np.ndarray, np.ndarray]:
    """Source and target class centers, (C x D) each, in full feature space.

    Source centers are simplex vertices embedded in the leading signal
    coordinates.  Target centers are those vertices rotated by the
    configured angle within the first two signal dimensions, then
    translated along the signal-subspace diagonal; noise coordinates
    are zero for both.
    """
    c, d = config.num_classes, config.dim
    signal = np.zeros((c, config.signal_dim))
    signal[:, : c - 1] = _simplex_coords(c, config.class_separation)

    shifted = signal.copy()
    if config.rotation_angle != 0.0:
        cos, sin = math.cos(config.rotation_angle), math.sin(config.rotation_angle)
        x0, x1 = signal[:, 0].copy(), signal[:, 1].copy()
        shifted[:, 0] = cos * x0 - sin * x1
        shifted[:, 1] = sin * x0 + cos * x1
    if config.translation != 0.0:
        diagonal = np.ones(config.signal_dim) / math.sqrt(config.signal_dim)
        shifted = shifted + config.translation * diagonal

    source = np.zeros((c, d))
    source[:, : config.signal_dim] = signal
    target = np.zeros((c, d))
    target[:, : config.signal_dim] = shifted
    return source, target


def generate(
    config: SyntheticConfig,
) -> tuple[SourceDataset, TargetDataset, np.ndarray]:
    """Draw both domains; target labels are returned only for scoring.

    Rows are class-blocked and exactly balanced.  The draw order is
    fixed (source signal, source noise, target signal, target noise) so
    a seed pins every byte of the output.
    """
    src_centers, tgt_centers = class_centers(config)
    n_per, c = config.points_per_class, config.num_classes
    labels = np.repeat(np.arange(c, dtype=np.int64), n_per)
    rng = np.random.default_rng(config.seed)

    def draw(centers: np.ndarray) -> np.ndarray:
        signal = centers[labels, : config.signal_dim] + rng.normal(
            scale=config.cluster_std, size=(labels.size, config.signal_dim)
        )
        noise = rng.normal(
            scale=config.noise_std, size=(labels.size, config.noise_dim)
        )
        return np.hstack([signal, noise])

    xs = draw(src_centers)
    xt = draw(tgt_centers)
    return SourceDataset(xs, labels, c), TargetDataset(xt), labels.copy()


@dataclass(frozen=True)
class AssumptionReport:
    """Cluster-geometry scores in a transformed space.

    ``separation_*``: min inter-class center distance over mean
    intra-class RMS radius (higher = tighter, more distinct classes).
    ``alignment``: mean same-class center displacement between domains
    over min inter-class center distance (lower = better aligned;
    above 1, domain shift exceeds class separation).  ``degenerate``
    flags collapsed geometry where a ratio was 0/0 and reported as 0.
    """

    separation_source: float
    separation_target: float
    alignment: float
    degenerate: bool


def _domain_geometry(
    z: np.ndarray, labels: np.ndarray, num_classes: int
) -> tuple[np.ndarray, float, float]:
    centers = np.vstack([z[labels == c].mean(axis=0) for c in range(num_classes)])
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    min_inter = float(np.min(dists[np.triu_indices(num_classes, k=1)]))
    radii = [
        math.sqrt(float(np.mean(np.sum((z[labels == c] - centers[c]) ** 2, axis=1))))
        for c in range(num_classes)
    ]
    return centers, min_inter, float(np.mean(radii))


def _ratio(numerator: float, denominator: float) -> tuple[float, bool]:
    if denominator == 0.0:
        return 0.0, True
    return numerator / denominator, False


def assumption_report(
    source: SourceDataset,
    target: TargetDataset,
    hidden_labels: np.ndarray,
    transform: Transform,
) -> AssumptionReport:
    """Score SEPARATION per domain and cross-domain ALIGNMENT under L."""
    labels_t = np.asarray(hidden_labels, dtype=np.int64)
    if labels_t.shape != (target.n,):
        raise DataValidationError(
            f"hidden labels shape {labels_t.shape} does not match target rows {target.n}"
        )
    counts = np.bincount(labels_t, minlength=source.num_classes)
    if labels_t.min() < 0 or labels_t.max() >= source.num_classes or counts.min() < 1:
        raise DataValidationError(
            "hidden labels must cover every class in [0, num_classes)"
        )
    zs = transform.apply(source.features)
    zt = transform.apply(target.features)
    c = source.num_classes
    centers_s, inter_s, radius_s = _domain_geometry(zs, source.labels, c)
    centers_t, inter_t, radius_t = _domain_geometry(zt, labels_t, c)

    sep_s, deg1 = _ratio(inter_s, radius_s)
    sep_t, deg2 = _ratio(inter_t, radius_t)
    displacement = float(
        np.mean(np.sqrt(np.sum((centers_s - centers_t) ** 2, axis=1)))
    )
    align, deg3 = _ratio(displacement, inter_s)
    return AssumptionReport(
        separation_source=sep_s,
        separation_target=sep_t,
        alignment=align,
        degenerate=deg1 or deg2 or deg3,
    )
