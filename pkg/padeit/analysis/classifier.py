"""Multinomial logistic regression and leave-one-group-out evaluation."""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from padeit.errors import DegenerateInputError, DimensionMismatchError
from padeit.perturb import LabeledDataset

logger = logging.getLogger(__name__)

DEFAULT_L2 = 1e-3
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 10000


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Per-class weights and bias over standardized channel features."""

    weights: np.ndarray
    bias: np.ndarray
    classes: Tuple[float, ...]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    iterations: int = 0
    converged: bool = False

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("a classifier needs at least two classes")
        if self.weights.shape != (len(self.classes), len(self.feature_mean)):
            raise DimensionMismatchError("weights must be classes x channels")

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != len(self.feature_mean):
            raise DimensionMismatchError(
                f"model expects {len(self.feature_mean)} channels, got {features.shape[1]}"
            )
        standardized = (features - self.feature_mean) / self.feature_scale
        return standardized @ self.weights.T + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.decision_function(features), axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lower class label
        return np.asarray(self.classes)[np.argmax(self.decision_function(features), axis=1)]

    def accuracy(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.predict(features) == np.asarray(labels, dtype=float)))


def train_classifier(
    dataset: LabeledDataset,
    held_out_group: Optional[int] = None,
    l2: float = DEFAULT_L2,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ClassifierModel:
    """Fit by full-batch gradient descent from zero weights.

    Step size is 1/L for the Lipschitz bound L = 0.5 * sigma_max([X, 1])^2 / n + l2;
    iteration stops when the gradient norm drops below ``tolerance``.
    """
    mask = np.ones(len(dataset), dtype=bool) if held_out_group is None else dataset.groups != held_out_group
    features = dataset.features[mask]
    labels = dataset.labels[mask]
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise DegenerateInputError(f"training rows hold a single class {classes}; need at least two")

    n, channels = features.shape
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale == 0] = 1.0
    standardized = (features - mean) / scale
    targets = (labels[:, None] == np.asarray(classes)[None, :]).astype(float)

    augmented = np.hstack([standardized, np.ones((n, 1))])
    lipschitz = 0.5 * np.linalg.norm(augmented, 2) ** 2 / n + l2
    step = 1.0 / lipschitz

    weights = np.zeros((len(classes), channels))
    bias = np.zeros(len(classes))
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        residual = softmax(standardized @ weights.T + bias, axis=1) - targets
        grad_w = residual.T @ standardized / n + l2 * weights
        grad_b = residual.mean(axis=0)
        if np.sqrt(np.sum(grad_w ** 2) + np.sum(grad_b ** 2)) < tolerance:
            converged = True
            break
        weights -= step * grad_w
        bias -= step * grad_b
    if not converged:
        logger.debug("Gradient descent stopped at the %d-iteration cap", max_iterations)
    return ClassifierModel(weights, bias, classes, mean, scale, iteration, converged)


@dataclass(frozen=True)
class GroupAccuracy:
    group: int
    n_train: int
    n_test: int
    accuracy: float

    def to_row(self) -> dict:
        return {"group": self.group, "n_train": self.n_train, "n_test": self.n_test, "accuracy": self.accuracy}


@dataclass(frozen=True)
class LooReport:
    groups: Tuple[GroupAccuracy, ...]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([g.accuracy for g in self.groups]))

    def accuracy_for(self, group: int) -> float:
        for entry in self.groups:
            if entry.group == group:
                return entry.accuracy
        raise KeyError(group)

    def to_rows(self) -> List[dict]:
        return [g.to_row() for g in self.groups]


def evaluate_loo(
    dataset: LabeledDataset,
    division: Optional[Sequence[float]] = None,
    l2: float = DEFAULT_L2,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    threads: int = 1,
) -> LooReport:
    """Hold out each group in turn, train on the rest and score the held-out rows."""
    data = dataset.restrict_to(division) if division is not None else dataset
    groups = sorted(set(data.groups.tolist()))
    if len(groups) < 2:
        raise DegenerateInputError("leave-one-group-out needs at least two groups")

    def fold(group: int) -> GroupAccuracy:
        model = train_classifier(data, group, l2, tolerance, max_iterations)
        test = data.groups == group
        accuracy = model.accuracy(data.features[test], data.labels[test])
        return GroupAccuracy(group, int(np.sum(~test)), int(np.sum(test)), accuracy)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(fold, groups))
    else:
        results = [fold(g) for g in groups]
    report = LooReport(tuple(results))
    logger.info("Leave-one-group-out over %d groups: mean accuracy %.4f", len(groups), report.mean_accuracy)
    return report
