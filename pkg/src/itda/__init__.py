"""Information-theoretic domain adaptation via a learned low-rank metric.

Learns a linear transform L that makes an unlabeled target domain
classifiable by nearest neighbor against a labeled source domain: the
objective rewards confident, diverse class posteriors on the target and
penalizes neighborhoods that can tell the two domains apart, subject to
a trace budget on L^T L.  Hyperparameters are selected by source
leave-one-out error in the learned space.
"""

from .data_model import (
    STANDARDIZE_MODES,
    STANDARDIZE_OFF,
    STANDARDIZE_PER_DOMAIN,
    STANDARDIZE_POOLED,
    DataValidationError,
    SourceDataset,
    StandardizationStats,
    TargetDataset,
    Transform,
    apply_standardizer,
    fit_standardizer,
    pooled_standardizer,
    standardize_pair,
)
from .evaluation import (
    PredictionResult,
    accuracy,
    confusion_counts,
    identity_baseline,
    knn1_classify,
    pca_baseline,
    per_class_accuracy,
)
from .model_selection import (
    CellResult,
    GridSearchFailure,
    HyperGrid,
    SelectionReport,
    grid_search,
)
from .neighbor_model import (
    NeighborPool,
    PoolData,
    assemble_pool,
    entropy,
    entropy_rows,
    neighbor_prob_matrix,
    neighbor_probs,
    pairwise_sq_dists,
    posterior_estimate,
    posterior_matrix,
)
from .objectives import (
    ObjectiveValue,
    domain_mi,
    gradient,
    source_error,
    target_mi,
    total_objective,
)
from .optimizer import (
    IterationRecord,
    NumericalFailure,
    OptimizationTrace,
    OptimizerConfig,
    TerminationReason,
    init_random,
    init_target_pca,
    minimize,
    minimize_restarts,
    project_trace_ball,
)
from .synthetic import (
    AssumptionReport,
    SyntheticConfig,
    assumption_report,
    class_centers,
    generate,
)

__version__ = "0.1.0"

__all__ = [
    "STANDARDIZE_MODES",
    "STANDARDIZE_OFF",
    "STANDARDIZE_PER_DOMAIN",
    "STANDARDIZE_POOLED",
    "AssumptionReport",
    "CellResult",
    "DataValidationError",
    "GridSearchFailure",
    "HyperGrid",
    "IterationRecord",
    "NeighborPool",
    "NumericalFailure",
    "ObjectiveValue",
    "OptimizationTrace",
    "OptimizerConfig",
    "PoolData",
    "PredictionResult",
    "SelectionReport",
    "SourceDataset",
    "StandardizationStats",
    "SyntheticConfig",
    "TargetDataset",
    "TerminationReason",
    "Transform",
    "accuracy",
    "apply_standardizer",
    "assemble_pool",
    "assumption_report",
    "class_centers",
    "confusion_counts",
    "domain_mi",
    "entropy",
    "entropy_rows",
    "fit_standardizer",
    "generate",
    "gradient",
    "grid_search",
    "identity_baseline",
    "init_random",
    "init_target_pca",
    "knn1_classify",
    "minimize",
    "minimize_restarts",
    "neighbor_prob_matrix",
    "neighbor_probs",
    "pairwise_sq_dists",
    "pca_baseline",
    "per_class_accuracy",
    "pooled_standardizer",
    "posterior_estimate",
    "posterior_matrix",
    "project_trace_ball",
    "source_error",
    "standardize_pair",
    "target_mi",
    "total_objective",
    "__version__",
]
