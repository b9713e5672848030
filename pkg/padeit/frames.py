"""Per-channel voltage frames and time-ordered frame series."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from padeit.channels import ChannelPlan
from padeit.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

TIMESTAMP_COLUMN = "timestamp"


def default_channel_ids(count: int) -> Tuple[str, ...]:
    return tuple(f"ch_{i}" for i in range(count))


def _finite_vector(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FrameVector:
    """One voltage per channel, ordered as in the plan."""

    values: np.ndarray
    plan: Optional[ChannelPlan] = None

    def __post_init__(self):
        values = _finite_vector(self.values, "frame")
        if self.plan is not None and len(values) != len(self.plan):
            raise DimensionMismatchError(f"frame has {len(values)} values, plan has {len(self.plan)} channels")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __sub__(self, other: "FrameVector") -> "FrameVector":
        if len(self) != len(other):
            raise DimensionMismatchError("frames differ in channel count")
        return FrameVector(self.values - other.values, self.plan or other.plan)

    def scaled(self, factor: float) -> "FrameVector":
        return FrameVector(self.values * factor, self.plan)

    @property
    def channel_ids(self) -> Tuple[str, ...]:
        return tuple(self.plan.channel_ids) if self.plan is not None else default_channel_ids(len(self))


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """Time-ordered frames sampled at ``rate`` Hz."""

    frames: np.ndarray
    rate: float
    session_id: str = "session"
    channel_ids: Tuple[str, ...] = field(default=())
    start_time: float = 0.0

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim == 1:
            frames = frames.reshape(1, -1) if frames.size else frames.reshape(0, 0)
        if frames.ndim != 2:
            raise DimensionMismatchError("frames must form a 2D array (frames x channels)")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frame series contains non-finite values")
        ids = tuple(self.channel_ids) or default_channel_ids(frames.shape[1])
        if len(ids) != frames.shape[1]:
            raise DimensionMismatchError(f"{len(ids)} channel ids for {frames.shape[1]} channels")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "channel_ids", ids)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def channel_count(self) -> int:
        return self.frames.shape[1]

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.rate

    def with_frames(self, frames: np.ndarray, rate: Optional[float] = None) -> "FrameSeries":
        return FrameSeries(frames, self.rate if rate is None else rate, self.session_id, self.channel_ids, self.start_time)

    def to_rows(self) -> List[dict]:
        rows = []
        for timestamp, values in zip(self.timestamps, self.frames):
            row = {TIMESTAMP_COLUMN: float(timestamp)}
            row.update({cid: float(v) for cid, v in zip(self.channel_ids, values)})
            rows.append(row)
        return rows

    @classmethod
    def from_rows(cls, header: Sequence[str], rows: Sequence[Sequence[str]], session_id: str = "session",
                  rate: Optional[float] = None) -> "FrameSeries":
        """Parse CSV cells; the rate comes from the timestamp column unless given."""
        header = list(header)
        if TIMESTAMP_COLUMN not in header:
            raise ValueError(f"frame CSV needs a '{TIMESTAMP_COLUMN}' column")
        if not rows:
            raise ValueError("frame CSV has no frames")
        t_col = header.index(TIMESTAMP_COLUMN)
        channel_cols = [i for i in range(len(header)) if i != t_col]
        try:
            times = np.array([float(r[t_col]) for r in rows])
            values = np.array([[float(r[i]) for i in channel_cols] for r in rows])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed frame CSV: {exc}") from exc
        if rate is None:
            if len(times) < 2:
                raise ValueError("a single-frame CSV needs an explicit rate")
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("timestamps must be strictly increasing")
            # timestamps are written rounded; keep the recovered rate stable
            rate = round(1.0 / float(np.mean(steps)), 9)
        ids = tuple(header[i] for i in channel_cols)
        return cls(values, rate, session_id, ids, float(times[0]))


def load_frame_series(path, rate: Optional[float] = None) -> FrameSeries:
    """Read a frame CSV (timestamp column plus one column per channel)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"frame CSV {path} is empty") from None
        rows = [row for row in reader if row]
    logger.debug("Read %d frames from %s", len(rows), path)
    return FrameSeries.from_rows(header, rows, session_id=path.stem, rate=rate)
