"""4-pole channel enumeration and the rectangle + diagonal down-selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

from padeit.electrodes import GridLayout
from padeit.errors import DegenerateInputError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class Channel:
    """One injection pair (source, sink) and one sensing pair (v+, v-)."""

    inject: Pair
    sense: Pair

    def __post_init__(self):
        inject = (int(self.inject[0]), int(self.inject[1]))
        sense = (int(self.sense[0]), int(self.sense[1]))
        if len({*inject, *sense}) != 4:
            raise ValueError(f"channel electrodes must be pairwise distinct: {inject} / {sense}")
        object.__setattr__(self, "inject", inject)
        object.__setattr__(self, "sense", sense)

    @property
    def electrodes(self) -> Tuple[int, int, int, int]:
        return (*self.inject, *self.sense)

    def reciprocal(self) -> "Channel":
        """Inject on the sensing pair and sense on the injection pair."""
        return Channel(self.sense, self.inject)

    def canonical(self) -> "Channel":
        return Channel(_pair(*self.inject), _pair(*self.sense))


@dataclass(frozen=True)
class ChannelPlan:
    channels: Tuple[Channel, ...]
    electrode_count: int

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(set(channels)) != len(channels):
            raise ValueError("channel plan contains duplicate channels")
        for channel in channels:
            if max(channel.electrodes) >= self.electrode_count or min(channel.electrodes) < 0:
                raise ValueError(f"channel {channel} references an electrode outside 0..{self.electrode_count - 1}")
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self) -> Iterator[Channel]:
        return iter(self.channels)

    def __getitem__(self, index: int) -> Channel:
        return self.channels[index]

    @property
    def channel_ids(self) -> List[str]:
        return [f"ch_{i}" for i in range(len(self.channels))]

    def injection_groups(self) -> Dict[Pair, List[int]]:
        """Channel indices grouped by injection pair, in first-seen order."""
        groups: Dict[Pair, List[int]] = {}
        for index, channel in enumerate(self.channels):
            groups.setdefault(channel.inject, []).append(index)
        return groups

    def sense_pairs(self) -> List[Pair]:
        seen: Dict[Pair, None] = {}
        for channel in self.channels:
            seen.setdefault(channel.sense, None)
        return list(seen)


def _pair(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


def _unique(channels: Iterable[Channel]) -> Tuple[Channel, ...]:
    return tuple(dict.fromkeys(channels))


def _require_grid(layout: GridLayout) -> None:
    if layout.rows < 2 or layout.cols < 2:
        raise DegenerateInputError(
            f"layout {layout.rows}x{layout.cols} needs at least 2 rows and 2 columns for this channel set"
        )


def _both_roles(first: Pair, second: Pair) -> List[Channel]:
    return [Channel(_pair(*first), _pair(*second)), Channel(_pair(*second), _pair(*first))]


def enumerate_all(n: int) -> ChannelPlan:
    """Every 4-subset, split into two pairs three ways, with both role assignments."""
    if n < 4:
        raise ValueError("at least 4 electrodes are required")
    channels: List[Channel] = []
    for a, b, c, d in combinations(range(n), 4):
        for first, second in (((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))):
            channels.extend(_both_roles(first, second))
    return ChannelPlan(tuple(channels), n)


def rectangle_channels(layout: GridLayout) -> ChannelPlan:
    """Opposite-edge channels on every axis-aligned rectangle, rectangles row-major."""
    _require_grid(layout)
    idx = layout.index
    channels: List[Channel] = []
    for r1, r2 in combinations(range(layout.rows), 2):
        for c1, c2 in combinations(range(layout.cols), 2):
            top = (idx(r1, c1), idx(r1, c2))
            bottom = (idx(r2, c1), idx(r2, c2))
            left = (idx(r1, c1), idx(r2, c1))
            right = (idx(r1, c2), idx(r2, c2))
            channels.extend(_both_roles(top, bottom))
            channels.extend(_both_roles(left, right))
    return ChannelPlan(tuple(channels), layout.count)


def _square_diagonals(layout: GridLayout, r: int, c: int, step: int) -> List[Channel]:
    idx = layout.index
    main = (idx(r, c), idx(r + step, c + step))
    anti = (idx(r, c + step), idx(r + step, c))
    return _both_roles(main, anti)


def _unit_squares(layout: GridLayout) -> List[Channel]:
    channels: List[Channel] = []
    for r in range(layout.rows - 1):
        for c in range(layout.cols - 1):
            channels.extend(_square_diagonals(layout, r, c, 1))
    return channels


def _squares_and_diamonds(layout: GridLayout) -> List[Channel]:
    """Unit squares, then for every 3x3 window its corner square and its edge-midpoint diamond."""
    idx = layout.index
    channels = _unit_squares(layout)
    for r in range(layout.rows - 2):
        for c in range(layout.cols - 2):
            channels.extend(_square_diagonals(layout, r, c, 2))
            vertical = (idx(r, c + 1), idx(r + 2, c + 1))
            horizontal = (idx(r + 1, c), idx(r + 1, c + 2))
            channels.extend(_both_roles(vertical, horizontal))
    return channels


DIAGONAL_STRATEGIES: Dict[str, Callable[[GridLayout], List[Channel]]] = {
    "squares_and_diamonds": _squares_and_diamonds,
    "unit_squares": _unit_squares,
}
DEFAULT_DIAGONAL_STRATEGY = "squares_and_diamonds"


def diagonal_channels(layout: GridLayout, strategy: str = DEFAULT_DIAGONAL_STRATEGY) -> ChannelPlan:
    _require_grid(layout)
    try:
        build = DIAGONAL_STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown diagonal strategy '{strategy}'") from None
    return ChannelPlan(_unique(build(layout)), layout.count)


def default_plan(layout: GridLayout, diagonal_strategy: str = DEFAULT_DIAGONAL_STRATEGY) -> ChannelPlan:
    """Rectangle channels followed by diagonal channels, duplicates removed."""
    channels = rectangle_channels(layout).channels + diagonal_channels(layout, diagonal_strategy).channels
    plan = ChannelPlan(_unique(channels), layout.count)
    logger.debug("Default plan for %s: %d channels", layout.label, len(plan))
    return plan


PLAN_STRATEGIES: Dict[str, Callable[..., ChannelPlan]] = {
    "default": default_plan,
    "rectangle": lambda layout, diagonal_strategy=None: rectangle_channels(layout),
    "diagonal": lambda layout, diagonal_strategy=DEFAULT_DIAGONAL_STRATEGY: diagonal_channels(layout, diagonal_strategy),
    "all": lambda layout, diagonal_strategy=None: enumerate_all(layout.count),
}


def plan_for_strategy(name: str, layout: GridLayout, diagonal_strategy: Optional[str] = None) -> ChannelPlan:
    if name not in PLAN_STRATEGIES:
        raise ValueError(f"unknown channel strategy '{name}'; choose from {sorted(PLAN_STRATEGIES)}")
    return PLAN_STRATEGIES[name](layout, diagonal_strategy or DEFAULT_DIAGONAL_STRATEGY)


def plan_rows(plan: ChannelPlan) -> List[dict]:
    return [
        {
            "channel": channel_id,
            "inject_pos": channel.inject[0],
            "inject_neg": channel.inject[1],
            "sense_pos": channel.sense[0],
            "sense_neg": channel.sense[1],
        }
        for channel_id, channel in zip(plan.channel_ids, plan.channels)
    ]
