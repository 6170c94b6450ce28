"""Sequence classifier (diagonal SSM), baselines, training, serialization."""

from .s4d import (
    ClassifierError,
    NumericError,
    PredictionWithConfidence,
    S4dClassifier,
    S4dConfig,
    StreamState,
    mc_dropout_predict,
    s4d_init,
)
from .train import (
    KnnModel,
    LinearModel,
    TrainConfig,
    TrainingError,
    TrainingReport,
    baseline_fit,
    baseline_predict,
    confusion_summary,
    evaluate,
    evaluate_trials,
    pooled_features,
    train,
)
from .bundle import (
    BundleFormatError,
    ModelBundle,
    bundle_from_model,
    load_model,
    save_model,
)

__all__ = [
    "BundleFormatError",
    "ClassifierError",
    "KnnModel",
    "LinearModel",
    "ModelBundle",
    "NumericError",
    "PredictionWithConfidence",
    "S4dClassifier",
    "S4dConfig",
    "StreamState",
    "TrainConfig",
    "TrainingError",
    "TrainingReport",
    "baseline_fit",
    "baseline_predict",
    "bundle_from_model",
    "confusion_summary",
    "evaluate",
    "evaluate_trials",
    "load_model",
    "mc_dropout_predict",
    "pooled_features",
    "s4d_init",
    "save_model",
    "train",
]
