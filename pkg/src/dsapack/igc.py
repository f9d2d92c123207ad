"""Interval graph coloring: optimal packing of equal-height intervals."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Hashable, Iterable


@dataclass(frozen=True)
class IntervalItem:
    key: Hashable
    t_s: float
    t_e: float

    def __post_init__(self):
        if not self.t_s < self.t_e:
            raise ValueError(f"interval {self.key!r} is empty")


@dataclass
class Coloring:
    colors: dict = field(default_factory=dict)
    n_colors: int = 0


def igc_color(items: Iterable) -> Coloring:
    """Greedy sweep coloring, lowest free color first.

    Items sharing only an endpoint never overlap (lifetimes are open), so
    releases at time ``t`` are handled before acquisitions at ``t``. The
    number of colors used equals the maximum overlap.
    """
    items = list(items)
    # (time, 0 = release | 1 = acquire, position in input)
    events = []
    for pos, it in enumerate(items):
        events.append((it.t_s, 1, pos))
        events.append((it.t_e, 0, pos))
    events.sort()

    free = []
    n_colors = 0
    held = {}
    colors = {}
    for _, kind, pos in events:
        if kind == 0:
            heapq.heappush(free, held.pop(pos))
            continue
        if free:
            c = heapq.heappop(free)
        else:
            c = n_colors
            n_colors += 1
        held[pos] = c
        colors[items[pos].key] = c
    return Coloring(colors, n_colors)


def igc_place_uniform(boxes: Iterable, height: int) -> dict:
    """Addresses ``color * height`` for boxes that all share one height."""
    if height < 1:
        raise ValueError("height must be >= 1")
    coloring = igc_color(boxes)
    return {key: c * height for key, c in coloring.colors.items()}
