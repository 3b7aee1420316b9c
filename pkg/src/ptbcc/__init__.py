"""Truth inference for multi-class crowd annotations.

Aggregates redundant noisy labels into per-task truth estimates. The main
engine learns a small shared set of prototype confusion matrices and a
per-worker Dirichlet mixture over them by mean-field variational
inference; majority voting and Dawid-Skene EM are included as baselines,
together with a synthetic-data sampler and an evaluation harness with an
exact one-sided signed-rank test.
"""

__version__ = "0.1.0"

from .baselines import BaselineResult, dawid_skene, majority_vote, vote_fractions
from .data import (
    AnnotationRecord,
    Dataset,
    build_dataset,
    dump_answers,
    dump_truths,
    load_dataset,
    parse_annotations,
    parse_truths,
)
from .engine import (
    ELogCache,
    Hyperparams,
    InferenceResult,
    ModelState,
    PriorState,
    compute_elbo,
    compute_elog,
    export_posteriors,
    fit,
    initialize,
    update_eta,
    update_mu,
    update_nu,
    update_phi,
    update_theta,
)
from .estimators import DawidSkene, MajorityVote, PrototypeBCC
from .evaluation import (
    MethodRun,
    WilcoxonReport,
    accuracy,
    benchmark,
    compare_methods,
    load_external_predictions,
    wilcoxon_one_sided,
)
from .special import digamma, log_beta
from .synthesis import (
    SyntheticConfig,
    SyntheticGroundTruth,
    confusion_prior,
    generate_synthetic,
)

__all__ = [
    "AnnotationRecord",
    "BaselineResult",
    "Dataset",
    "DawidSkene",
    "ELogCache",
    "Hyperparams",
    "InferenceResult",
    "MajorityVote",
    "MethodRun",
    "ModelState",
    "PriorState",
    "PrototypeBCC",
    "SyntheticConfig",
    "SyntheticGroundTruth",
    "WilcoxonReport",
    "accuracy",
    "benchmark",
    "build_dataset",
    "compare_methods",
    "compute_elbo",
    "compute_elog",
    "confusion_prior",
    "dawid_skene",
    "digamma",
    "dump_answers",
    "dump_truths",
    "export_posteriors",
    "fit",
    "generate_synthetic",
    "initialize",
    "load_dataset",
    "load_external_predictions",
    "log_beta",
    "majority_vote",
    "parse_annotations",
    "parse_truths",
    "update_eta",
    "update_mu",
    "update_nu",
    "update_phi",
    "update_theta",
    "vote_fractions",
    "wilcoxon_one_sided",
]
