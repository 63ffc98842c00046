"""Adaptation objective: class-information and domain-information terms.

Three scalar quantities drive the method, all built from stochastic
neighbor posteriors under a shared transform L:

* ``source_error``: leave-one-out error on labeled source rows, one
  minus the average probability mass landing on each row's own class.
  Used to pick hyperparameters, never optimized directly.
* ``target_mi``: mutual information between target rows and their
  predicted class posterior (prior entropy minus mean posterior
  entropy), with source rows as the neighbor pool.  High values mean
  target points commit to confident, diverse class predictions.
* ``domain_mi``: mutual information between rows and a binary
  source/target indicator over the pooled leave-one-out neighborhood.
  High values mean the domains are separable, so it enters the
  objective with a positive weight to be driven down.

The optimized objective is ``total = -target_mi + lam * domain_mi``,
and :func:`gradient` gives its exact derivative with respect to L via
the softmax chain rule.  Value and gradient share one pairwise distance
computation; the fused private entry point :func:`_evaluate` is the
optimizer's hot path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)
from .neighbor_model import (
    entropy,
    entropy_rows,
    neighbor_prob_matrix,
    posterior_matrix,
    projected_sq_dists,
)


@dataclass(frozen=True)
class ObjectiveValue:
    """All scalar terms of the objective at one transform.

    ``total`` is always composed as ``-i_t + lam * i_st``; ``eps_s``
    rides along for model selection and never enters ``total``.
    """

    total: float
    i_t: float
    i_st: float
    eps_s: float
    lam: float


def _check_pair(transform: Transform, source: SourceDataset, target: TargetDataset) -> None:
    if source.dim != transform.in_dim or target.dim != transform.in_dim:
        raise DataValidationError(
            f"feature dims (source {source.dim}, target {target.dim}) do not "
            f"match transform in_dim {transform.in_dim}"
        )


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0.0:
        raise DataValidationError(f"lam must be finite and >= 0, got {lam}")
    return lam


def _guarded_log(p: np.ndarray) -> np.ndarray:
    """Elementwise ln p with 0 entries mapped to 0 instead of -inf.

    Safe here because every use multiplies the result by a probability
    that is itself 0 wherever p is 0.
    """
    positive = p > 0.0
    return np.where(positive, np.log(np.where(positive, p, 1.0)), 0.0)


def _mi_value(post: np.ndarray) -> float:
    """Prior entropy minus mean posterior entropy, clamped to >= 0.

    Non-finite values (overflowed distances upstream) propagate as nan
    instead of being swallowed by the clamp.
    """
    prior = post.mean(axis=0)
    mi = entropy(prior) - float(np.mean(entropy_rows(post)))
    if not math.isfinite(mi):
        return float("nan")
    return max(0.0, mi)


def _mi_grad(
    probs: np.ndarray,
    post: np.ndarray,
    pool_labels: np.ndarray,
    zq: np.ndarray,
    xq: np.ndarray,
    zp: np.ndarray,
    xp: np.ndarray,
) -> np.ndarray:
    """Gradient of the mutual information with respect to L.

    Chain rule through posterior -> neighbor softmax -> squared
    distances.  ``a[i, j]`` is the sensitivity of the information value
    to the logit of neighbor j for query i; the four matrix products
    below assemble sum_ij a_ij * d(||L(xq_i - xp_j)||^2)/dL without
    forming any per-pair outer product.
    """
    n_queries = post.shape[0]
    g_post = (_guarded_log(post) - _guarded_log(post.mean(axis=0))[None, :]) / n_queries
    u = g_post[:, pool_labels]
    pu = probs * u
    a = pu - probs * np.sum(pu, axis=1, keepdims=True)
    row = np.sum(a, axis=1)
    col = np.sum(a, axis=0)
    grad = (
        zq.T @ (row[:, None] * xq)
        + zp.T @ (col[:, None] * xp)
        - zq.T @ (a @ xp)
        - zp.T @ (a.T @ xq)
    )
    return -2.0 * grad


def _require_loo_classes(source: SourceDataset) -> None:
    if int(source.class_counts().min()) < 2:
        raise DataValidationError("singleton class under leave-one-out")


def _source_error_from_probs(probs: np.ndarray, source: SourceDataset) -> float:
    post = posterior_matrix(probs, source.labels, source.num_classes)
    correct = post[np.arange(source.n), source.labels]
    eps = 1.0 - float(np.mean(correct))
    if not math.isfinite(eps):
        return float("nan")
    return min(1.0, max(0.0, eps))


def source_error(transform: Transform, source: SourceDataset) -> float:
    """Leave-one-out error of source rows against their own class.

    Each row queries all other source rows; the error is one minus the
    mean probability mass assigned to the row's true class.  Requires
    every class to have at least two rows, since a singleton's own-class
    mass is structurally zero.
    """
    if source.dim != transform.in_dim:
        raise DataValidationError(
            f"source dim {source.dim} does not match transform in_dim {transform.in_dim}"
        )
    _require_loo_classes(source)
    zs = transform.apply(source.features)
    d2 = projected_sq_dists(zs, zs)
    probs = neighbor_prob_matrix(d2, exclude_diagonal=True)
    return _source_error_from_probs(probs, source)


def target_mi(transform: Transform, source: SourceDataset, target: TargetDataset) -> float:
    """Information between target rows and their class posterior.

    Target rows query the source pool only.  The value is the entropy
    of the mean posterior minus the mean posterior entropy, in nats,
    and lies in [0, ln(num_classes)].
    """
    _check_pair(transform, source, target)
    zs = transform.apply(source.features)
    zt = transform.apply(target.features)
    d2 = projected_sq_dists(zt, zs)
    probs = neighbor_prob_matrix(d2)
    post = posterior_matrix(probs, source.labels, source.num_classes)
    return _mi_value(post)


def domain_mi(transform: Transform, source: SourceDataset, target: TargetDataset) -> float:
    """Information between pooled rows and the source/target indicator.

    All rows of both domains query all other pooled rows (leave one
    out) with binary domain labels.  The value lies in [0, ln 2]; zero
    means neighborhoods are domain-blind.
    """
    _check_pair(transform, source, target)
    if source.n + target.n < 3:
        raise DataValidationError(
            f"domain information needs at least 3 pooled rows, got {source.n + target.n}"
        )
    zall = np.vstack([transform.apply(source.features), transform.apply(target.features)])
    domain = _domain_labels(source.n, target.n)
    d2 = projected_sq_dists(zall, zall)
    probs = neighbor_prob_matrix(d2, exclude_diagonal=True)
    post = posterior_matrix(probs, domain, 2)
    return _mi_value(post)


def _domain_labels(n_source: int, n_target: int) -> np.ndarray:
    return np.concatenate(
        [np.zeros(n_source, dtype=np.int64), np.ones(n_target, dtype=np.int64)]
    )


def _target_mi_value_grad(
    transform: Transform, source: SourceDataset, target: TargetDataset
) -> tuple[float, np.ndarray]:
    """Value and gradient of the class-information term alone."""
    _check_pair(transform, source, target)
    zs = transform.apply(source.features)
    zt = transform.apply(target.features)
    d2 = projected_sq_dists(zt, zs)
    probs = neighbor_prob_matrix(d2)
    post = posterior_matrix(probs, source.labels, source.num_classes)
    grad = _mi_grad(probs, post, source.labels, zt, target.features, zs, source.features)
    return _mi_value(post), grad


def _domain_mi_value_grad(
    transform: Transform, source: SourceDataset, target: TargetDataset
) -> tuple[float, np.ndarray]:
    """Value and gradient of the domain-information term alone."""
    _check_pair(transform, source, target)
    if source.n + target.n < 3:
        raise DataValidationError(
            f"domain information needs at least 3 pooled rows, got {source.n + target.n}"
        )
    xall = np.vstack([source.features, target.features])
    zall = xall @ transform.matrix.T
    domain = _domain_labels(source.n, target.n)
    d2 = projected_sq_dists(zall, zall)
    probs = neighbor_prob_matrix(d2, exclude_diagonal=True)
    post = posterior_matrix(probs, domain, 2)
    grad = _mi_grad(probs, post, domain, zall, xall, zall, xall)
    return _mi_value(post), grad


@dataclass(frozen=True, eq=False)
class _ForwardState:
    """Intermediates one objective evaluation leaves behind for its gradient."""

    n_source: int
    labels: np.ndarray
    domain: np.ndarray
    xall: np.ndarray
    zall: np.ndarray
    probs_ts: np.ndarray
    post_ts: np.ndarray
    probs_all: np.ndarray
    post_all: np.ndarray


def _forward(
    transform: Transform,
    source: SourceDataset,
    target: TargetDataset,
    lam: float,
    with_eps: bool = False,
) -> tuple[float, float, float, float, _ForwardState]:
    """Objective value sharing one pairwise distance pass across terms.

    The pooled distance matrix contains the target-vs-source block and
    the source-vs-source block, so every term reads slices of a single
    computation.  Returns (total, i_t, i_st, eps_s, state); ``eps_s``
    is nan unless requested; ``state`` feeds :func:`_backward`.
    """
    _check_pair(transform, source, target)
    n, m = source.n, target.n
    if n + m < 3:
        raise DataValidationError(
            f"domain information needs at least 3 pooled rows, got {n + m}"
        )
    xall = np.vstack([source.features, target.features])
    zall = xall @ transform.matrix.T
    d2_all = projected_sq_dists(zall, zall)

    probs_ts = neighbor_prob_matrix(d2_all[n:, :n])
    post_ts = posterior_matrix(probs_ts, source.labels, source.num_classes)
    i_t = _mi_value(post_ts)

    probs_all = neighbor_prob_matrix(d2_all, exclude_diagonal=True)
    domain = _domain_labels(n, m)
    post_all = posterior_matrix(probs_all, domain, 2)
    i_st = _mi_value(post_all)

    total = -i_t + lam * i_st

    eps_s = float("nan")
    if with_eps:
        _require_loo_classes(source)
        probs_ss = neighbor_prob_matrix(d2_all[:n, :n], exclude_diagonal=True)
        eps_s = _source_error_from_probs(probs_ss, source)

    state = _ForwardState(
        n_source=n, labels=source.labels, domain=domain, xall=xall, zall=zall,
        probs_ts=probs_ts, post_ts=post_ts, probs_all=probs_all, post_all=post_all,
    )
    return total, i_t, i_st, eps_s, state


def _backward(state: _ForwardState, lam: float) -> np.ndarray:
    """Gradient of the total objective from saved forward intermediates."""
    n = state.n_source
    zs, zt = state.zall[:n], state.zall[n:]
    xs, xt = state.xall[:n], state.xall[n:]
    grad_it = _mi_grad(state.probs_ts, state.post_ts, state.labels, zt, xt, zs, xs)
    grad_ist = _mi_grad(
        state.probs_all, state.post_all, state.domain,
        state.zall, state.xall, state.zall, state.xall,
    )
    return -grad_it + lam * grad_ist


def _evaluate(
    transform: Transform,
    source: SourceDataset,
    target: TargetDataset,
    lam: float,
    with_gradient: bool = False,
    with_eps: bool = False,
) -> tuple[float, float, float, float, np.ndarray | None]:
    """One-call wrapper around :func:`_forward` and :func:`_backward`."""
    total, i_t, i_st, eps_s, state = _forward(transform, source, target, lam, with_eps)
    grad = _backward(state, lam) if with_gradient else None
    return total, i_t, i_st, eps_s, grad


def total_objective(
    transform: Transform, source: SourceDataset, target: TargetDataset, lam: float
) -> ObjectiveValue:
    """All objective terms at one transform.

    ``total = -i_t + lam * i_st``; ``eps_s`` is reported for model
    selection but does not contribute to ``total``.
    """
    lam = _check_lam(lam)
    total, i_t, i_st, eps_s, _ = _evaluate(
        transform, source, target, lam, with_eps=True
    )
    return ObjectiveValue(total=total, i_t=i_t, i_st=i_st, eps_s=eps_s, lam=lam)


def gradient(
    transform: Transform, source: SourceDataset, target: TargetDataset, lam: float
) -> np.ndarray:
    """Derivative of ``-target_mi + lam * domain_mi`` with respect to L.

    Returns a writable array with the transform's shape.  The analytic
    form is exact; agreement with central finite differences is the
    correctness bar enforced by the test suite.
    """
    lam = _check_lam(lam)
    _, _, _, _, grad = _evaluate(transform, source, target, lam, with_gradient=True)
    assert grad is not None
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    return grad
