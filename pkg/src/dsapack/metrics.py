"""Load, makespan, validity, page-local fragmentation and the two bounds."""

from __future__ import annotations

import math
import warnings
from bisect import insort
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .trace import Job, JobSet

DEFAULT_PAGE_SIZE = 4096


@dataclass(frozen=True)
class PlacedJob:
    id: int
    t_s: int
    t_e: int
    h: int
    p: int

    def __post_init__(self):
        if self.h < 1:
            raise ValueError(f"job {self.id}: height must be >= 1")
        if self.t_e < self.t_s:
            raise ValueError(f"job {self.id}: ends before it starts")
        if self.p < 0:
            raise ValueError(f"job {self.id}: negative address")

    @property
    def top(self) -> int:
        return self.p + self.h

    def unplaced(self) -> Job:
        return Job(self.id, self.t_s, self.t_e, self.h)


@dataclass
class Placement:
    jobs: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise ValueError("placed job ids must be unique")

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)

    def jobset(self) -> JobSet:
        jobs = [j.unplaced() for j in self.jobs]
        return JobSet(jobs, max((j.t_e for j in jobs), default=0))

    def by_id(self) -> dict:
        return {j.id: j for j in self.jobs}


@dataclass(frozen=True)
class LoadProfile:
    L: int
    t_L: float
    total_load: int
    h_max: int
    h_min: int


@dataclass(frozen=True)
class FragmentationReport:
    gap_area: int
    total_load: int
    F: float
    page_size: int
    gap_count: int


@dataclass(frozen=True)
class BoundsReport:
    robson: Optional[int]
    ba_upper: int
    L: int
    h_max: int


def liveness(job, t) -> int:
    """1 iff ``t`` lies in the open lifetime interval of ``job``."""
    return int(job.t_s < t < job.t_e)


def _elementary_intervals(jobs) -> np.ndarray:
    return np.unique([t for j in jobs for t in (j.t_s, j.t_e)])


def load_profile(jobs: Iterable) -> LoadProfile:
    jobs = list(jobs)
    if not jobs:
        return LoadProfile(0, 0.0, 0, 0, 0)
    times = _elementary_intervals(jobs)
    delta = np.zeros(len(times), dtype=np.int64)
    starts = np.searchsorted(times, [j.t_s for j in jobs])
    ends = np.searchsorted(times, [j.t_e for j in jobs])
    heights = np.array([j.h for j in jobs], dtype=np.int64)
    np.add.at(delta, starts, heights)
    np.subtract.at(delta, ends, heights)
    # load[k] is the load on the open interval (times[k], times[k+1])
    load = np.cumsum(delta)[:-1]
    if len(load) == 0:
        L, t_L = 0, float(times[0])
    else:
        k = int(np.argmax(load))
        L, t_L = int(load[k]), (float(times[k]) + float(times[k + 1])) / 2
    total = sum((j.t_e - j.t_s) * j.h for j in jobs)
    return LoadProfile(L, t_L, total, int(heights.max()), int(heights.min()))


def makespan(placement) -> int:
    jobs = list(placement)
    if not jobs:
        return 0
    return max(j.p + j.h for j in jobs) - min(j.p for j in jobs)


def validate_placement(placement) -> list:
    """Return conflicting id pairs; an empty list means the placement is valid.

    Two jobs conflict when their open lifetimes intersect and their address
    ranges ``[p, p + h)`` overlap.
    """
    jobs = sorted(placement, key=lambda j: (j.t_s, j.id))
    active = []
    conflicts = []
    for j in jobs:
        if j.t_e == j.t_s:
            continue
        active = [a for a in active if a.t_e > j.t_s]
        for a in active:
            if a.p < j.p + j.h and j.p < a.p + a.h:
                conflicts.append(tuple(sorted((a.id, j.id))))
        active.append(j)
    return sorted(conflicts)


def is_valid(placement) -> bool:
    return not validate_placement(placement)


class InvalidPlacement(ValueError):
    def __init__(self, conflicts):
        shown = ", ".join(map(str, conflicts[:5]))
        super().__init__(f"placement has {len(conflicts)} conflicts: {shown}")
        self.conflicts = conflicts


def require_valid(placement):
    conflicts = validate_placement(placement)
    if conflicts:
        raise InvalidPlacement(conflicts)


def _gap_segments(live_sorted, page_size, floor=0):
    """Free ranges at or above ``floor`` lying below a live byte of the same page."""
    segments = []
    prev_top = None
    for p, top in live_sorted:
        base = max((p // page_size) * page_size, floor)
        lo = base if prev_top is None else max(prev_top, base)
        if lo < p:
            segments.append((lo, p))
        prev_top = top if prev_top is None else max(prev_top, top)
    return segments


def fragmentation(placement, page_size: int = DEFAULT_PAGE_SIZE) -> FragmentationReport:
    """Page-local gap area divided by total load.

    The sweep runs over the elementary intervals between consecutive
    distinct job endpoints, inside which the live set is constant. Only
    addresses from the lowest one the placement uses count, as for the
    makespan. A gap region is counted once for as long as the same free
    address range persists across adjacent intervals.
    """
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    jobs = list(placement)
    require_valid(jobs)
    total = sum((j.t_e - j.t_s) * j.h for j in jobs)
    if not jobs:
        return FragmentationReport(0, 0, 0.0, page_size, 0)

    starting, ending = {}, {}
    for j in jobs:
        if j.t_e > j.t_s:
            starting.setdefault(j.t_s, []).append(j)
            ending.setdefault(j.t_e, []).append(j)
    times = sorted(set(starting) | set(ending))
    floor = min(j.p for j in jobs)

    live = []
    gap_area = 0
    gap_count = 0
    previous = set()
    for a, b in zip(times, times[1:]):
        for j in ending.get(a, ()):
            live.remove((j.p, j.p + j.h))
        for j in starting.get(a, ()):
            insort(live, (j.p, j.p + j.h))
        segments = _gap_segments(live, page_size, floor)
        width = b - a
        gap_area += width * sum(hi - lo for lo, hi in segments)
        current = set(segments)
        gap_count += len(current - previous)
        previous = current

    F = gap_area / total if total else 0.0
    return FragmentationReport(gap_area, total, F, page_size, gap_count)


def robson_bound(L: int, h_max: int) -> int:
    """Worst-case lower bound ``(L / 2) * log2(h_max)`` for general policies."""
    if h_max < 2:
        raise ValueError("robson_bound needs h_max >= 2")
    return int(round(L / 2 * math.log2(h_max)))


def ba_upper_bound(L: int, h_max: int, bound_ratio_divisor: float = 1.0) -> int:
    """``[1 + 2 * (h_max / (d * L))**(1/7)] * L`` with ``d`` defaulting to 1.

    A divisor of 64 gives the tighter variant used in some reference measurements.
    """
    if h_max < 1 or L < 1:
        raise ValueError("ba_upper_bound needs L, h_max >= 1")
    if h_max > L:
        warnings.warn(f"h_max={h_max} exceeds L={L}; bound outside its regime")
    ratio = h_max / (bound_ratio_divisor * L)
    return int(round((1.0 + 2.0 * ratio ** (1.0 / 7.0)) * L))


def bounds(profile: LoadProfile, bound_ratio_divisor: float = 1.0) -> BoundsReport:
    robson = robson_bound(profile.L, profile.h_max) if profile.h_max >= 2 else None
    return BoundsReport(
        robson=robson,
        ba_upper=ba_upper_bound(profile.L, profile.h_max, bound_ratio_divisor),
        L=profile.L,
        h_max=profile.h_max,
    )


def placement_metrics(placement: Placement, page_size: int = DEFAULT_PAGE_SIZE) -> dict:
    """Metrics JSON object; field names are fixed for the comparison tooling."""
    profile = load_profile(placement.jobs)
    frag = fragmentation(placement.jobs, page_size)
    bnd = bounds(profile) if placement.jobs else None
    return {
        "label": placement.label,
        "L": profile.L,
        "h_max": profile.h_max,
        "total_load": profile.total_load,
        "makespan": makespan(placement.jobs),
        "fragmentation": round(frag.F, 4),
        "gap_area": frag.gap_area,
        "robson_bound": bnd.robson if bnd else None,
        "ba_upper_bound": bnd.ba_upper if bnd else None,
        "page_size": page_size,
    }
