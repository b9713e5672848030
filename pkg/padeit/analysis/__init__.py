"""Signal conditioning and statistical evaluation of channel data."""

from padeit.analysis.classifier import ClassifierModel, LooReport, evaluate_loo, train_classifier
from padeit.analysis.roc import auc, binary_fullness_eval, fullness_sweep, roc_auc, roc_curve
from padeit.analysis.signals import (
    baseline_subtract,
    channel_profile,
    global_signal,
    group_average,
    normalize_amplitude,
    normalize_to_start,
    window_mean,
)
from padeit.analysis.similarity import cosine_similarity, mean_pairwise_pearson, pearson

__all__ = [
    "ClassifierModel",
    "LooReport",
    "auc",
    "baseline_subtract",
    "binary_fullness_eval",
    "channel_profile",
    "cosine_similarity",
    "evaluate_loo",
    "fullness_sweep",
    "global_signal",
    "group_average",
    "mean_pairwise_pearson",
    "normalize_amplitude",
    "normalize_to_start",
    "pearson",
    "roc_auc",
    "roc_curve",
    "train_classifier",
    "window_mean",
]
