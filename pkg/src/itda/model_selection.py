"""Hyperparameter grid search scored by source leave-one-out error.

Every (output dimension, domain weight) cell trains its own transform
with restarts, then the learned transform is scored by the source
leave-one-out error in the learned space.  The winning cell attains the
minimum error; ties (equal to 12 decimals) go to the smaller weight,
then the smaller dimension, favoring less regularization and a cheaper
model.  Cells are independent, so they can run in worker processes; the
report is assembled in a fixed order either way and reruns are
bit-identical given the seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .data_model import (
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
)
from .objectives import source_error
from .optimizer import (
    NumericalFailure,
    OptimizerConfig,
    OptimizationTrace,
    TerminationReason,
    minimize_restarts,
)


@dataclass(frozen=True)
class HyperGrid:
    """Candidate output dimensions and domain weights."""

    dims: tuple[int, ...]
    lambdas: tuple[float, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        lambdas = tuple(float(l) for l in self.lambdas)
        if not dims or not lambdas:
            raise DataValidationError("grid must have at least one dim and one lambda")
        if any(d < 1 for d in dims):
            raise DataValidationError(f"all dims must be >= 1, got {dims}")
        if any(not math.isfinite(l) or l < 0.0 for l in lambdas):
            raise DataValidationError(f"all lambdas must be finite and >= 0, got {lambdas}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lambdas", lambdas)

    def cells(self) -> list[tuple[int, float]]:
        """All (d, lambda) pairs in fixed row-major order."""
        return [(d, lam) for d in self.dims for lam in self.lambdas]


@dataclass(frozen=True, eq=False)
class CellResult:
    """Outcome of one grid cell; ``failed`` cells carry only an error."""

    d: int
    lam: float
    eps_s: float
    i_t: float
    i_st: float
    total: float
    termination: TerminationReason | None
    iterations: int
    transform: Transform | None
    trace: OptimizationTrace | None
    failed: bool = False
    error: str | None = None


@dataclass(frozen=True, eq=False)
class SelectionReport:
    """All cell outcomes plus the index of the winning cell."""

    cells: tuple[CellResult, ...]
    winner_index: int
    tie_break: str

    @property
    def winner(self) -> CellResult:
        return self.cells[self.winner_index]


class GridSearchFailure(RuntimeError):
    """Every cell failed numerically; carries the per-cell diagnostics."""

    def __init__(self, message: str, cells: tuple[CellResult, ...]):
        super().__init__(message)
        self.cells = cells


def _run_cell(
    source: SourceDataset,
    target: TargetDataset,
    d: int,
    lam: float,
    config: OptimizerConfig,
    restarts: int,
    use_pca_init: bool,
) -> CellResult:
    try:
        transform, trace = minimize_restarts(
            source, target, lam, d, config,
            restarts=restarts, use_pca_init=use_pca_init,
        )
    except NumericalFailure as exc:
        return CellResult(
            d=d, lam=lam, eps_s=float("nan"), i_t=float("nan"),
            i_st=float("nan"), total=float("nan"), termination=None,
            iterations=len(exc.trace.records), transform=None, trace=None,
            failed=True, error=str(exc),
        )
    final = trace.final
    return CellResult(
        d=d, lam=lam, eps_s=source_error(transform, source),
        i_t=final.i_t, i_st=final.i_st, total=final.total,
        termination=trace.termination, iterations=trace.iterations,
        transform=transform, trace=trace,
    )


def _cell_args(source, target, grid, config, restarts, use_pca_init):
    return [
        (source, target, d, lam, config, restarts, use_pca_init)
        for d, lam in grid.cells()
    ]


def grid_search(
    source: SourceDataset,
    target: TargetDataset,
    grid: HyperGrid,
    config: OptimizerConfig,
    restarts: int = 3,
    use_pca_init: bool = True,
    workers: int = 1,
) -> SelectionReport:
    """Train every grid cell and pick the minimum-error one.

    Cells run in the fixed order of :meth:`HyperGrid.cells`.  A cell
    whose optimization fails numerically is recorded as failed and
    excluded from the argmin; if every cell fails the whole search
    raises with per-cell diagnostics.  ``workers`` > 1 runs cells in
    separate processes with identical results.
    """
    if workers < 1:
        raise DataValidationError(f"workers must be >= 1, got {workers}")
    if max(grid.dims) > source.dim:
        raise DataValidationError(
            f"grid dim {max(grid.dims)} exceeds feature dim {source.dim}"
        )
    if int(source.class_counts().min()) < 2:
        raise DataValidationError("singleton class under leave-one-out")

    args = _cell_args(source, target, grid, config, restarts, use_pca_init)
    if workers == 1:
        cells = tuple(_run_cell(*a) for a in args)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = tuple(pool.map(_run_cell, *zip(*args)))

    alive = [(i, c) for i, c in enumerate(cells) if not c.failed]
    if not alive:
        raise GridSearchFailure(
            f"all {len(cells)} grid cells failed numerically", cells
        )
    keyed = sorted(alive, key=lambda ic: (round(ic[1].eps_s, 12), ic[1].lam, ic[1].d))
    winner_index = keyed[0][0]
    best_eps = round(keyed[0][1].eps_s, 12)
    tied = sum(1 for _, c in alive if round(c.eps_s, 12) == best_eps)
    tie_break = (
        "unique minimum eps_s"
        if tied == 1
        else f"{tied} cells tied on eps_s to 12 decimals; kept smallest lambda, then d"
    )
    return SelectionReport(cells=cells, winner_index=winner_index, tie_break=tie_break)
