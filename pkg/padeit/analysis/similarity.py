"""Similarity between channel profiles and curves."""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

import numpy as np

from padeit.errors import DegenerateInputError, DimensionMismatchError


def _paired(a: Sequence[float], b: Sequence[float]):
    x = np.asarray(a, dtype=float).reshape(-1)
    y = np.asarray(b, dtype=float).reshape(-1)
    if x.size == 0 or x.size != y.size:
        raise DimensionMismatchError("inputs must have equal, nonzero length")
    return x, y


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    x, y = _paired(a, b)
    norm = np.linalg.norm(x) * np.linalg.norm(y)
    if norm == 0:
        raise DegenerateInputError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(x, y) / norm, -1.0, 1.0))


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    x, y = _paired(a, b)
    dx = x - x.mean()
    dy = y - y.mean()
    scale = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if scale == 0:
        raise DegenerateInputError("pearson correlation undefined for zero variance")
    return float(np.clip(np.dot(dx, dy) / scale, -1.0, 1.0))


def mean_pairwise_pearson(curves: Sequence[Sequence[float]]) -> float:
    """Average correlation over every pair of curves."""
    if len(curves) < 2:
        raise DegenerateInputError("need at least two curves")
    return float(np.mean([pearson(a, b) for a, b in combinations(curves, 2)]))
