"""Online first-fit / best-fit placement over one contiguous arena."""

from __future__ import annotations

import math
from bisect import bisect_left, insort
from typing import Optional

from .metrics import Placement, PlacedJob
from .trace import ALLOC, Identity, SizingPolicy, Trace, TraceError, validate_trace

FIRST_FIT = "first-fit"
BEST_FIT = "best-fit"
POLICIES = (FIRST_FIT, BEST_FIT)


class FreeStore:
    """Sorted, coalesced free ranges over ``[0, inf)``."""

    def __init__(self, policy: str = FIRST_FIT):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self.policy = policy
        self.ranges = [(0, math.inf)]

    def allocate(self, size: int) -> int:
        fits = [k for k, (lo, hi) in enumerate(self.ranges) if hi - lo >= size]
        if self.policy == FIRST_FIT:
            k = fits[0]
        else:
            # min() keeps the first, i.e. lowest-address, range on ties
            k = min(fits, key=lambda k: self.ranges[k][1] - self.ranges[k][0])
        lo, hi = self.ranges[k]
        if hi - lo == size:
            del self.ranges[k]
        else:
            self.ranges[k] = (lo + size, hi)
        return lo

    def free(self, addr: int, size: int):
        lo, hi = addr, addr + size
        k = bisect_left(self.ranges, (lo, hi))
        if k > 0 and self.ranges[k - 1][1] > lo:
            raise ValueError(f"double free of [{lo}, {hi})")
        if k < len(self.ranges) and self.ranges[k][0] < hi:
            raise ValueError(f"double free of [{lo}, {hi})")
        if k < len(self.ranges) and self.ranges[k][0] == hi:
            hi = self.ranges.pop(k)[1]
        if k > 0 and self.ranges[k - 1][1] == lo:
            lo = self.ranges.pop(k - 1)[0]
        insort(self.ranges, (lo, hi))


def simulate(trace: Trace, sizing: Optional[SizingPolicy] = None, policy: str = FIRST_FIT) -> Placement:
    """Replay a well-formed trace through an online policy."""
    sizing = sizing or Identity()
    report = validate_trace(trace)
    if not report.well_formed:
        problems = report.errors + [f"leaked id {i}" for i in report.leaked_ids]
        raise TraceError("trace is not well-formed: " + "; ".join(problems[:5]))

    store = FreeStore(policy)
    clock = 0
    live = {}
    placed = []
    for r in trace.requests:
        if r.kind == ALLOC:
            h = sizing.size(r.size)
            live[r.id] = (clock, h, store.allocate(h))
            clock += h
        else:
            t_s, h, p = live.pop(r.id)
            store.free(p, h)
            placed.append(PlacedJob(r.id, t_s, clock, h, p))
    order = {r.id: k for k, r in enumerate(trace.allocs)}
    placed.sort(key=lambda j: order[j.id])
    return Placement(placed, policy)
