"""Stochastic neighbor probabilities, posteriors, and entropy.

Distances between points x_i, x_j under a transform L are
``||L x_i - L x_j||^2``.  A query point assigns each candidate neighbor
the probability ``p_j = exp(-d_j^2) / sum_k exp(-d_k^2)`` over its pool
(a full softmax over negative squared distances, never truncated to k
nearest neighbors).  Class or domain posteriors follow by summing
neighbor probabilities per label.  All probabilities are computed with
a log-sum-exp shift so rows remain normalized even when squared
distances reach 1e6 and beyond.

Three pool layouts cover every use in this package, named by
:class:`NeighborPool`: source queries against the remaining source rows
(leave-one-out), target queries against all source rows, and every row
of both domains against all other rows.  Self-exclusion applies exactly
when the query row is a member of the pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import logsumexp, xlogy

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)


class NeighborPool(Enum):
    """Which rows act as queries and which as candidate neighbors."""

    SOURCE_ONLY_LOO = "source_only_loo"
    SOURCE_FOR_TARGET = "source_for_target"
    ALL_LOO = "all_loo"


@dataclass(frozen=True, eq=False)
class PoolData:
    """Materialized query/pool arrays for one :class:`NeighborPool` kind."""

    queries: np.ndarray
    pool: np.ndarray
    pool_labels: np.ndarray
    num_categories: int
    exclude_diagonal: bool


def assemble_pool(
    kind: NeighborPool, source: SourceDataset, target: TargetDataset
) -> PoolData:
    """Build the (queries, pool, labels) arrays for a pool kind.

    For ALL_LOO the rows are stacked source-then-target and the labels
    are binary domain indicators (0 = source, 1 = target).
    """
    if source.dim != target.dim:
        raise DataValidationError(
            f"source dim {source.dim} does not match target dim {target.dim}"
        )
    if kind is NeighborPool.SOURCE_ONLY_LOO:
        return PoolData(
            queries=source.features,
            pool=source.features,
            pool_labels=source.labels,
            num_categories=source.num_classes,
            exclude_diagonal=True,
        )
    if kind is NeighborPool.SOURCE_FOR_TARGET:
        return PoolData(
            queries=target.features,
            pool=source.features,
            pool_labels=source.labels,
            num_categories=source.num_classes,
            exclude_diagonal=False,
        )
    stacked = np.vstack([source.features, target.features])
    domain = np.concatenate(
        [np.zeros(source.n, dtype=np.int64), np.ones(target.n, dtype=np.int64)]
    )
    return PoolData(
        queries=stacked,
        pool=stacked,
        pool_labels=domain,
        num_categories=2,
        exclude_diagonal=True,
    )


def pairwise_sq_dists(
    transform: Transform, queries: np.ndarray, pool: np.ndarray
) -> np.ndarray:
    """Squared distances ||L q_i - L p_j||^2 as a (queries x pool) matrix."""
    if queries.shape[1] != transform.in_dim or pool.shape[1] != transform.in_dim:
        raise DataValidationError(
            f"feature dims ({queries.shape[1]}, {pool.shape[1]}) do not match "
            f"transform in_dim {transform.in_dim}"
        )
    zq = queries @ transform.matrix.T
    zp = pool @ transform.matrix.T
    return projected_sq_dists(zq, zp)


def projected_sq_dists(zq: np.ndarray, zp: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between already-projected rows."""
    sq_q = np.sum(zq * zq, axis=1)
    sq_p = np.sum(zp * zp, axis=1)
    d2 = sq_q[:, None] + sq_p[None, :] - 2.0 * (zq @ zp.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def neighbor_probs(sq_dist_row: np.ndarray, exclude: int | None = None) -> np.ndarray:
    """Softmax of negative squared distances over one pool row.

    The excluded entry (the query itself, for leave-one-out pools) gets
    probability exactly 0.
    """
    row = np.asarray(sq_dist_row, dtype=np.float64)
    if row.ndim != 1:
        raise DataValidationError("squared-distance row must be 1-D")
    n = row.shape[0]
    if exclude is not None and not 0 <= exclude < n:
        raise DataValidationError(f"exclude index {exclude} out of range for {n} entries")
    effective = n - (1 if exclude is not None else 0)
    if effective < 1:
        raise DataValidationError("no neighbors: effective pool is empty")
    logits = -row
    if exclude is not None:
        logits = logits.copy()
        logits[exclude] = -np.inf
    probs = np.exp(logits - logsumexp(logits))
    if exclude is not None:
        probs[exclude] = 0.0
    return probs


def neighbor_prob_matrix(sq_dists: np.ndarray, exclude_diagonal: bool = False) -> np.ndarray:
    """Row-wise softmax of negative squared distances.

    With ``exclude_diagonal`` the matrix must be square and entry (i, i)
    is forced to probability 0 (the query is a member of its own pool).
    Rows are shifted by their max logit before exponentiation, so huge
    squared distances stay normalized instead of flushing to 0/0.
    """
    probs = -np.asarray(sq_dists, dtype=np.float64)
    if probs.ndim != 2:
        raise DataValidationError("squared-distance matrix must be 2-D")
    if exclude_diagonal:
        if probs.shape[0] != probs.shape[1]:
            raise DataValidationError("diagonal exclusion requires a square matrix")
        if probs.shape[1] < 2:
            raise DataValidationError("no neighbors: effective pool is empty")
        np.fill_diagonal(probs, -np.inf)
    probs -= np.max(probs, axis=1, keepdims=True)
    np.exp(probs, out=probs)
    if exclude_diagonal:
        np.fill_diagonal(probs, 0.0)
    probs /= np.sum(probs, axis=1, keepdims=True)
    return probs


def posterior_estimate(
    probs: np.ndarray, pool_labels: np.ndarray, num_classes: int
) -> np.ndarray:
    """Per-class posterior: sum of neighbor probabilities per label.

    Total mass is preserved, so a normalized input yields a normalized
    posterior without renormalizing.
    """
    p = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(pool_labels)
    if p.shape != labels.shape:
        raise DataValidationError(
            f"probs shape {p.shape} does not match labels shape {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataValidationError(
            f"pool labels must lie in [0, {num_classes})"
        )
    return np.bincount(labels, weights=p, minlength=num_classes).astype(np.float64)


def posterior_matrix(
    prob_matrix: np.ndarray, pool_labels: np.ndarray, num_classes: int
) -> np.ndarray:
    """Row-wise posterior estimates: (queries x classes) = P @ onehot."""
    onehot = np.zeros((pool_labels.shape[0], num_classes))
    onehot[np.arange(pool_labels.shape[0]), pool_labels] = 1.0
    return prob_matrix @ onehot


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats with the convention 0 * ln 0 = 0."""
    arr = np.asarray(p, dtype=np.float64)
    return max(-float(np.sum(xlogy(arr, arr))), 0.0)


def entropy_rows(p_matrix: np.ndarray) -> np.ndarray:
    """Entropy of each row of a matrix of probability vectors, in nats."""
    arr = np.asarray(p_matrix, dtype=np.float64)
    return np.maximum(-np.sum(xlogy(arr, arr), axis=1), 0.0)
