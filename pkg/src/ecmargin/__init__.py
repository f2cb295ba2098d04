"""Effective class margins for long-tail detection.

Estimators for probabilistic AP and pairwise ranking error, closed-form
bounds tying the two together, optimal per-class margins with the matching
surrogate loss, and a synthetic sandbox that audits trained models against
the theory.
"""

from .bounds import (
    BoundEnvelope,
    GFunction,
    analytic_min_feasible,
    analytic_min_gmax,
    ap_lower,
    ap_lower_branches,
    ap_upper,
    audit_interval,
    binary_bound_check,
    envelope,
    slope_m,
    variational_max_oracle,
    variational_min_oracle,
)
from .ecm_loss import (
    NEGATIVE,
    POSITIVE,
    LossEval,
    bce_loss,
    decision_logit,
    ecm_loss,
    focal_ecm_loss,
    log_weight_ratio,
    margin_error,
    surrogate_score,
)
from .errors import (
    EcmError,
    InputFormatError,
    NumericalError,
    ResourceLimitError,
    UndefinedPrecisionError,
    UnknownClassError,
    ValidationError,
)
from .margins import (
    Margins,
    MarginWeights,
    margin_objective,
    margins_grid_oracle,
    optimal_margins,
    weights,
)
from .metrics import (
    PrecisionRecallCurve,
    PRPoint,
    ScoreSet,
    ap_standard_error,
    average_precision,
    load_scores,
    positive_precisions,
    pr_curve,
    precision_at,
    ranking_error,
    ranking_error_bruteforce,
    ranking_standard_error,
    recall_at,
)
from .priors import (
    ClassCounts,
    ClassEntry,
    ClassStats,
    all_class_stats,
    background_count,
    class_stats,
    load_counts,
)
from .sandbox import (
    BACKGROUND_LABEL,
    Dataset,
    Model,
    PerClassReport,
    SyntheticConfig,
    TrainConfig,
    TrainReport,
    bound_audit,
    audit_failures,
    dataset_stats,
    default_margin_weights,
    evaluate,
    generate,
    measured_background_ratio,
    rare_tercile,
    run_experiment,
    train,
    zipf_class_counts,
)
from .verify import SUITES, run as run_verification

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_LABEL",
    "BoundEnvelope",
    "ClassCounts",
    "ClassEntry",
    "ClassStats",
    "Dataset",
    "EcmError",
    "GFunction",
    "InputFormatError",
    "LossEval",
    "MarginWeights",
    "Margins",
    "Model",
    "NEGATIVE",
    "NumericalError",
    "POSITIVE",
    "PRPoint",
    "PerClassReport",
    "PrecisionRecallCurve",
    "ResourceLimitError",
    "SUITES",
    "ScoreSet",
    "SyntheticConfig",
    "TrainConfig",
    "TrainReport",
    "UndefinedPrecisionError",
    "UnknownClassError",
    "ValidationError",
    "all_class_stats",
    "analytic_min_feasible",
    "analytic_min_gmax",
    "ap_lower",
    "ap_lower_branches",
    "ap_standard_error",
    "ap_upper",
    "audit_failures",
    "audit_interval",
    "average_precision",
    "background_count",
    "bce_loss",
    "binary_bound_check",
    "bound_audit",
    "class_stats",
    "dataset_stats",
    "decision_logit",
    "default_margin_weights",
    "ecm_loss",
    "envelope",
    "evaluate",
    "focal_ecm_loss",
    "generate",
    "load_counts",
    "load_scores",
    "log_weight_ratio",
    "margin_error",
    "margin_objective",
    "margins_grid_oracle",
    "measured_background_ratio",
    "optimal_margins",
    "positive_precisions",
    "pr_curve",
    "precision_at",
    "ranking_error",
    "ranking_error_bruteforce",
    "ranking_standard_error",
    "rare_tercile",
    "recall_at",
    "run_experiment",
    "run_verification",
    "slope_m",
    "surrogate_score",
    "train",
    "variational_max_oracle",
    "variational_min_oracle",
    "weights",
    "zipf_class_counts",
    "__version__",
]
