"""ROC curves, AUC and binary fullness detection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from padeit.analysis.classifier import DEFAULT_L2, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, train_classifier
from padeit.errors import DegenerateInputError, DimensionMismatchError
from padeit.perturb import LabeledDataset

logger = logging.getLogger(__name__)

DEFAULT_FULLNESS_PAIRS = ((0.0, 300.0), (0.0, 400.0), (100.0, 300.0), (100.0, 400.0))


def _binary_inputs(scores: Sequence[float], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.size != y.size:
        raise DimensionMismatchError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if y.all() or not y.any():
        raise DegenerateInputError("ROC needs both positive and negative labels")
    return s, y


def _roc_counts(scores: np.ndarray, positive: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer (fp, tp) counts for +inf, every midpoint between distinct scores, and -inf."""
    order = np.argsort(-scores, kind="mergesort")
    ranked = scores[order]
    hits = positive[order]
    # last position of each run of equal scores
    ends = np.append(np.flatnonzero(np.diff(ranked)), len(ranked) - 1)
    tp = np.concatenate([[0], np.cumsum(hits)[ends]])
    fp = np.concatenate([[0], np.cumsum(~hits)[ends]])
    distinct = ranked[ends]
    thresholds = np.concatenate([[np.inf], (distinct[:-1] + distinct[1:]) / 2.0, [-np.inf]])
    return fp, tp, thresholds


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds); a row is predicted positive when its score exceeds the threshold."""
    s, y = _binary_inputs(scores, labels)
    fp, tp, thresholds = _roc_counts(s, y)
    return fp / np.sum(~y), tp / np.sum(y), thresholds


def auc(fpr: Sequence[float], tpr: Sequence[float]) -> float:
    """Trapezoidal area under a monotone ROC curve."""
    x = np.asarray(fpr, dtype=float)
    y = np.asarray(tpr, dtype=float)
    if x.size != y.size or x.size < 2:
        raise DimensionMismatchError("fpr and tpr need equal length of at least 2")
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AUC of the threshold sweep, summed in integers so it equals the Mann-Whitney statistic."""
    s, y = _binary_inputs(scores, labels)
    fp, tp, _ = _roc_counts(s, y)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * int(np.sum(y)) * int(np.sum(~y)))


@dataclass(frozen=True, eq=False)
class FullnessResult:
    v_low: float
    v_high: float
    auc: float
    accuracy: float
    positives: int
    negatives: int
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    resubstitution: bool = False

    def to_row(self) -> dict:
        return {
            "v_low": self.v_low,
            "v_high": self.v_high,
            "auc": self.auc,
            "accuracy": self.accuracy,
            "positives": self.positives,
            "negatives": self.negatives,
            "resubstitution": int(self.resubstitution),
        }

    def curve_rows(self) -> List[dict]:
        return [
            {"fpr": float(f), "tpr": float(t), "threshold": float(h)}
            for f, t, h in zip(self.fpr, self.tpr, self.thresholds)
        ]


def binary_fullness_eval(
    dataset: LabeledDataset,
    v_low: float,
    v_high: float,
    l2: float = DEFAULT_L2,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FullnessResult:
    """Full (volume >= v_high) versus empty (volume <= v_low) detection.

    Each row is scored by a model trained without its group; a dataset
    with a single group is scored by resubstitution. Accuracy counts a
    row as positive when its score exceeds 0.5.
    """
    if not v_low < v_high:
        raise ValueError("v_low must be below v_high")
    positive = dataset.labels >= v_high
    negative = dataset.labels <= v_low
    if not positive.any() or not negative.any():
        raise DegenerateInputError(f"no rows on one side of ({v_low:g}, {v_high:g}) mL")
    keep = positive | negative
    binary = LabeledDataset(
        dataset.features[keep], positive[keep].astype(float), dataset.groups[keep], dataset.trials[keep],
        dataset.seeds[keep], dataset.channel_ids, (0.0, 1.0),
    )

    scores = np.empty(len(binary))
    groups = sorted(set(binary.groups.tolist()))
    resubstitution = len(groups) < 2
    if resubstitution:
        logger.warning("Single group in fullness evaluation; scoring by resubstitution")
        model = train_classifier(binary, None, l2, tolerance, max_iterations)
        scores[:] = model.predict_proba(binary.features)[:, 1]
    else:
        for group in groups:
            test = binary.groups == group
            model = train_classifier(binary, group, l2, tolerance, max_iterations)
            scores[test] = model.predict_proba(binary.features[test])[:, 1]

    truth = binary.labels.astype(bool)
    fpr, tpr, thresholds = roc_curve(scores, truth)
    area = roc_auc(scores, truth)
    accuracy = float(np.mean((scores > 0.5) == truth))
    return FullnessResult(
        float(v_low), float(v_high), area, accuracy, int(truth.sum()), int((~truth).sum()),
        fpr, tpr, thresholds, resubstitution,
    )


def fullness_sweep(
    dataset: LabeledDataset,
    pairs: Sequence[Sequence[float]] = DEFAULT_FULLNESS_PAIRS,
    max_group: Optional[int] = None,
    **kwargs,
) -> List[FullnessResult]:
    """binary_fullness_eval for each (v_low, v_high), optionally on groups <= max_group only."""
    data = dataset.subset(dataset.groups <= max_group) if max_group is not None else dataset
    return [binary_fullness_eval(data, float(low), float(high), **kwargs) for low, high in pairs]
