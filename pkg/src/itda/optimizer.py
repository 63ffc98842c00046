"""Projected gradient descent over transforms with a trace budget.

The feasible set is ``{L : trace(L^T L) <= d}``, a Frobenius ball, so
projection is a single rescale.  Each iteration takes a gradient step,
projects, and accepts the candidate under an Armijo sufficient-decrease
test, halving the step on rejection.  Initialization comes from the
principal directions of the target data (the useful directions to
preserve when nothing else is known) or from seeded random orthonormal
rows; a restart driver runs several inits and keeps the best final
objective.

Accepted objective values are non-increasing by construction, and every
run is deterministic given its inputs and seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)
from .objectives import _backward, _check_lam, _forward


class TerminationReason(Enum):
    GRAD_TOL = "grad_tol"
    MAX_ITERS = "max_iters"
    STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the descent loop; defaults suit standardized features."""

    max_iters: int = 300
    grad_tol: float = 1e-5
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    min_step: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise DataValidationError(f"max_iters must be >= 0, got {self.max_iters}")
        if not self.grad_tol > 0.0:
            raise DataValidationError(f"grad_tol must be > 0, got {self.grad_tol}")
        if not 0.0 < self.armijo_c < 1.0:
            raise DataValidationError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise DataValidationError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )
        if not self.initial_step > 0.0:
            raise DataValidationError(
                f"initial_step must be > 0, got {self.initial_step}"
            )
        if not 0.0 < self.min_step <= self.initial_step:
            raise DataValidationError(
                f"min_step must lie in (0, initial_step], got {self.min_step}"
            )
        if self.seed < 0:
            raise DataValidationError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class IterationRecord:
    """State after one accepted step (or at the projected init)."""

    total: float
    i_t: float
    i_st: float
    step_size: float
    trace_gram: float


@dataclass(frozen=True)
class OptimizationTrace:
    """Accepted-iterate history; termination is None only on abort."""

    records: tuple[IterationRecord, ...]
    termination: TerminationReason | None

    @property
    def final(self) -> IterationRecord:
        if not self.records:
            raise DataValidationError("empty trace has no final record")
        return self.records[-1]

    @property
    def iterations(self) -> int:
        return max(0, len(self.records) - 1)


class NumericalFailure(RuntimeError):
    """Objective or gradient became non-finite; carries the trace so far."""

    def __init__(self, message: str, trace: OptimizationTrace):
        super().__init__(message)
        self.trace = trace


def project_trace_ball(transform: Transform, max_trace: float | None = None) -> Transform:
    """Scale the transform down so trace(L^T L) <= max_trace.

    Transforms already inside the ball are returned unchanged (the same
    object).  ``max_trace`` defaults to the number of output rows.
    """
    budget = float(transform.out_dim if max_trace is None else max_trace)
    if not budget > 0.0:
        raise DataValidationError(f"trace budget must be > 0, got {budget}")
    tr = transform.trace_gram()
    if tr <= budget:
        return transform
    return Transform(transform.matrix * np.sqrt(budget / tr))


def init_target_pca(target: TargetDataset, d: int) -> Transform:
    """Rows of L are the top-d principal directions of the target data.

    Directions come from the singular vectors of the mean-centered
    feature matrix in descending singular-value order.  When the data
    has rank below d, the remaining rows are filled from the orthonormal
    complement the full decomposition provides, so the result always has
    d orthonormal rows and trace exactly d.
    """
    if target.n < 2:
        raise DataValidationError(
            f"principal-direction init needs at least 2 rows, got {target.n}"
        )
    if not 1 <= d <= target.dim:
        raise DataValidationError(
            f"output dim must lie in [1, {target.dim}], got {d}"
        )
    centered = target.features - target.features.mean(axis=0)
    _, _, vh = np.linalg.svd(centered, full_matrices=True)
    return Transform(vh[:d])


def init_random(in_dim: int, out_dim: int, seed: int) -> Transform:
    """Seeded random transform with orthonormal rows (trace exactly d)."""
    if not 1 <= out_dim <= in_dim:
        raise DataValidationError(
            f"output dim must lie in [1, {in_dim}], got {out_dim}"
        )
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((in_dim, out_dim))
    q, _ = np.linalg.qr(gauss)
    return Transform(q.T)


def _finite_or_fail(
    total: float, grad: np.ndarray | None, records: list[IterationRecord]
) -> None:
    bad = not np.isfinite(total) or (grad is not None and not np.all(np.isfinite(grad)))
    if bad:
        raise NumericalFailure(
            "numerical failure: objective or gradient is not finite",
            OptimizationTrace(records=tuple(records), termination=None),
        )


def minimize(
    source: SourceDataset,
    target: TargetDataset,
    lam: float,
    d: int,
    init: Transform,
    config: OptimizerConfig,
) -> tuple[Transform, OptimizationTrace]:
    """Descend ``-target_mi + lam * domain_mi`` from one starting point.

    The init is projected into the trace ball before anything else, and
    the trace's first record describes that projected start (step size
    0).  Each iteration checks the projected-gradient residual against
    ``grad_tol`` before stepping, then backtracks from ``initial_step``
    until the Armijo test ``f(new) <= f(old) - c * step * ||g||_F^2``
    accepts; a step that backtracks below ``min_step`` ends the run.
    """
    lam = _check_lam(lam)
    if init.out_dim != d:
        raise DataValidationError(
            f"init has {init.out_dim} rows but d={d} was requested"
        )
    budget = float(d)
    current = project_trace_ball(init, budget)
    records: list[IterationRecord] = []

    total, i_t, i_st, _, state = _forward(current, source, target, lam)
    _finite_or_fail(total, None, records)
    grad = _backward(state, lam)
    _finite_or_fail(total, grad, records)
    records.append(
        IterationRecord(
            total=total, i_t=i_t, i_st=i_st, step_size=0.0,
            trace_gram=current.trace_gram(),
        )
    )

    termination = TerminationReason.MAX_ITERS
    for _ in range(config.max_iters):
        residual = current.matrix - project_trace_ball(
            Transform(current.matrix - grad), budget
        ).matrix
        if np.max(np.abs(residual)) <= config.grad_tol:
            termination = TerminationReason.GRAD_TOL
            break

        grad_norm_sq = float(np.sum(grad * grad))
        step = config.initial_step
        accepted = None
        while step >= config.min_step:
            candidate = project_trace_ball(
                Transform(current.matrix - step * grad), budget
            )
            cand_total, cand_it, cand_ist, _, cand_state = _forward(
                candidate, source, target, lam
            )
            _finite_or_fail(cand_total, None, records)
            if cand_total <= total - config.armijo_c * step * grad_norm_sq:
                accepted = candidate
                break
            step *= config.backtrack_factor
        if accepted is None:
            termination = TerminationReason.STEP_UNDERFLOW
            break

        current = accepted
        total, i_t, i_st = cand_total, cand_it, cand_ist
        grad = _backward(cand_state, lam)
        _finite_or_fail(total, grad, records)
        records.append(
            IterationRecord(
                total=total, i_t=i_t, i_st=i_st, step_size=step,
                trace_gram=current.trace_gram(),
            )
        )

    return current, OptimizationTrace(records=tuple(records), termination=termination)


def minimize_restarts(
    source: SourceDataset,
    target: TargetDataset,
    lam: float,
    d: int,
    config: OptimizerConfig,
    restarts: int = 3,
    use_pca_init: bool = True,
) -> tuple[Transform, OptimizationTrace]:
    """Run several inits and keep the lowest final objective.

    The first start is the target principal-direction init (when
    enabled); the rest are random orthonormal inits seeded
    ``config.seed + k`` so the whole sweep is deterministic.  Ties keep
    the earliest run.
    """
    if restarts < 1:
        raise DataValidationError(f"restarts must be >= 1, got {restarts}")
    inits: list[Transform] = []
    if use_pca_init:
        inits.append(init_target_pca(target, d))
    offset = len(inits)
    for k in range(restarts - offset):
        inits.append(init_random(target.dim, d, config.seed + offset + k))

    best: tuple[Transform, OptimizationTrace] | None = None
    for init in inits:
        result = minimize(source, target, lam, d, init, config)
        if best is None or result[1].final.total < best[1].final.total:
            best = result
    assert best is not None
    return best
