from .augment import AugPolicy, apply_policy, one_hot
from .classifier import (
    ClassifierAborted,
    ClassifierConfig,
    ClassifierMetrics,
    ClassifierRun,
    auroc,
    evaluate_classifier,
    macro_f1,
    sensitivity_at_specificity,
    train_classifier,
)
from .protocol import (
    MissingGenerator,
    ProtocolTable,
    RegimenResult,
    mix_synthetic,
    run_protocol,
    synthetic_pool,
)

__all__ = [
    "AugPolicy",
    "ClassifierAborted",
    "ClassifierConfig",
    "ClassifierMetrics",
    "ClassifierRun",
    "MissingGenerator",
    "ProtocolTable",
    "RegimenResult",
    "apply_policy",
    "auroc",
    "evaluate_classifier",
    "macro_f1",
    "mix_synthetic",
    "one_hot",
    "run_protocol",
    "sensitivity_at_specificity",
    "synthetic_pool",
    "train_classifier",
]
