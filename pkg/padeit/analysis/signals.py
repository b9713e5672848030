"""Windowing, baselining and normalization of frame series."""

from __future__ import annotations

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from padeit.errors import DegenerateInputError
from padeit.frames import FrameSeries, FrameVector

logger = logging.getLogger(__name__)


def _require_frames(series: FrameSeries) -> None:
    if len(series) == 0:
        raise DegenerateInputError("frame series is empty")


def window_frame_count(rate: float, window_seconds: float) -> int:
    # ceil with a small guard so 2 s at 3 Hz is 6 frames, not 7
    return max(1, math.ceil(window_seconds * rate - 1e-9))


def window_mean(series: FrameSeries, window_seconds: float) -> FrameVector:
    """Per-channel mean over the most recent ceil(window * rate) frames."""
    _require_frames(series)
    if not window_seconds > 0:
        raise ValueError("window must cover at least one frame")
    count = window_frame_count(series.rate, window_seconds)
    if count > len(series):
        logger.debug("Window of %d frames exceeds series length %d; using all frames", count, len(series))
    return FrameVector(series.frames[-count:].mean(axis=0))


def baseline_subtract(series: FrameSeries) -> FrameSeries:
    """Subtract the first frame from every frame."""
    _require_frames(series)
    return series.with_frames(series.frames - series.frames[0])


def group_average(series: FrameSeries, group_size: int) -> FrameSeries:
    """Mean of consecutive non-overlapping groups; the trailing remainder is dropped."""
    if group_size < 1:
        raise ValueError("group_size must be at least 1")
    groups = len(series) // group_size
    trimmed = series.frames[: groups * group_size]
    averaged = trimmed.reshape(groups, group_size, series.channel_count).mean(axis=1)
    return series.with_frames(averaged, rate=series.rate / group_size)


def normalize_to_start(curve: Sequence[float]) -> np.ndarray:
    values = np.asarray(curve, dtype=float)
    if values.size == 0:
        raise DegenerateInputError("curve is empty")
    if values[0] == 0:
        raise DegenerateInputError("curve starts at zero; cannot normalize to start")
    return values / values[0]


def global_signal(series: FrameSeries) -> np.ndarray:
    """Mean across channels of each frame."""
    _require_frames(series)
    return series.frames.mean(axis=1)


def normalize_amplitude(vector: Sequence[float]) -> np.ndarray:
    values = np.asarray(vector, dtype=float)
    peak = np.max(np.abs(values)) if values.size else 0.0
    if peak == 0:
        raise DegenerateInputError("vector is identically zero; cannot normalize amplitude")
    return values / peak


def channel_profile(series: FrameSeries) -> Tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population SD of the amplitude-normalized frames."""
    _require_frames(series)
    normalized = np.vstack([normalize_amplitude(frame) for frame in series.frames])
    return normalized.mean(axis=0), normalized.std(axis=0)
