"""Offline placement by recursive boxing.

Jobs of mixed heights are grouped into boxes, boxes into bigger boxes, until
everything sits in boxes of one height. Those are placed optimally by
interval graph coloring, unboxed back into jobs, and finally compacted.

Stages, outermost first:

* :func:`run_ba` picks an error parameter and retries with a new one when
  a stage reports failure (:class:`BASignal`).
* :func:`box_mixed` splits items at a height threshold and boxes the small
  ones, recursing until the height ratio is small enough.
* :func:`box_buckets` buckets items by geometric height class and packs
  each bucket as unit-height items.
* :func:`box_unit` boxes unit items around critical times, recursing on the
  items not live at any of them.
* :func:`box_at_instant` groups items that share a common instant.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Union

import numpy as np

from .igc import IntervalItem, igc_color, igc_place_uniform
from .metrics import LoadProfile, Placement, PlacedJob, load_profile, require_valid
from .trace import Job

log = logging.getLogger(__name__)

EMPTY_SMALL_SET = "EmptySmallSet"
EMPTY_R = "EmptyR"
CAPACITY_ZERO = "CapacityZero"
DEPTH_EXCEEDED = "DepthExceeded"
RETRIES_EXHAUSTED = "RetriesExhausted"


@dataclass(eq=False)
class BoxNode:
    """A rectangle holding jobs (by id) and other boxes, one per row slot.

    Children sharing a row index never overlap in time.
    """

    t_s: int
    t_e: int
    height: int
    row_unit: int
    children: list = field(default_factory=list)

    @property
    def h(self) -> int:
        return self.height

    @cached_property
    def leaf_count(self) -> int:
        return sum(c.leaf_count if isinstance(c, BoxNode) else 1 for c, _ in self.children)

    @cached_property
    def min_id(self) -> int:
        return min(c.min_id if isinstance(c, BoxNode) else c for c, _ in self.children)

    def job_ids(self):
        stack = [self]
        while stack:
            box = stack.pop()
            for child, _ in box.children:
                if isinstance(child, BoxNode):
                    stack.append(child)
                else:
                    yield child


Item = Union[Job, BoxNode]


class BASignal(Exception):
    """Failure propagated from an unsafe stage back to the retry loop."""

    def __init__(self, kind: str, boxed_count: int = 0, suggested_moment=None, detail=""):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.boxed_count = boxed_count
        self.suggested_moment = suggested_moment
        self.detail = detail


class RetriesExhausted(BASignal):
    def __init__(self, boxed_count: int = 0, diagnostics=None):
        super().__init__(RETRIES_EXHAUSTED, boxed_count, detail="epsilon retry budget spent")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class BAParams:
    epsilon: float
    r: float
    mu: float
    H: int
    log_base: float = 10.0

    @property
    def threshold(self) -> float:
        """Items at most this tall form the small set."""
        return self.mu * self.H


def ba_params(h_min: int, h_max: int, epsilon: float, log_base: float = 10.0) -> BAParams:
    r = h_max / h_min
    lg2 = math.log(r, log_base) ** 2
    if lg2 == 0:
        raise ValueError("parameters undefined for uniform heights (r = 1)")
    mu = epsilon / lg2
    H = math.ceil(mu**5 * h_max / lg2)
    return BAParams(epsilon, r, mu, max(H, 1), log_base)


def initial_epsilon(profile: LoadProfile) -> float:
    return (profile.h_max / profile.L) ** (1.0 / 7.0)


@dataclass
class EpsilonController:
    epsilon: float
    bottom_limit: Optional[float] = None
    best_boxed_count: int = 0
    iteration: int = 0
    max_iterations: int = 100
    step: float = 0.1

    def next_epsilon(self, last_boxed: int) -> float:
        """Move to the next error parameter after a failed attempt.

        A new record of boxed jobs pins the current value as the bottom
        limit. The value grows by ``step`` (10% at first) and wraps back to
        the bottom limit once it exceeds twice that limit. Failures are
        deterministic in epsilon, so every wrap halves the step to probe
        values the previous sweep jumped over.
        """
        self.iteration += 1
        if self.iteration >= self.max_iterations:
            raise RetriesExhausted(self.best_boxed_count)
        if last_boxed > self.best_boxed_count:
            self.best_boxed_count = last_boxed
            self.bottom_limit = self.epsilon
        self.epsilon *= 1.0 + self.step
        if self.bottom_limit is not None and self.epsilon > 2 * self.bottom_limit:
            self.epsilon = self.bottom_limit
            self.step /= 2
        return self.epsilon


@dataclass
class BAConfig:
    seed: int = 0
    max_iterations: int = 100
    depth_limit: int = 64
    log_base: float = 10.0


@dataclass
class RunDiagnostics:
    iterations: int = 0
    final_epsilon: Optional[float] = None
    bottom_limit: Optional[float] = None
    signals: list = field(default_factory=list)
    boxed_count_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_epsilon": self.final_epsilon,
            "bottom_limit": self.bottom_limit,
            "signals": list(self.signals),
            "boxed_count_history": list(self.boxed_count_history),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass
class _Run:
    """Per-attempt state threaded through the stages."""

    rng: random.Random
    depth_limit: int = 64
    log_base: float = 10.0
    signals: list = field(default_factory=list)
    boxed: int = 0


def _ref(item: Item):
    return item if isinstance(item, BoxNode) else item.id


def _order_key(item: Item):
    return item.min_id if isinstance(item, BoxNode) else item.id


def _leaves(item: Item) -> int:
    return item.leaf_count if isinstance(item, BoxNode) else 1


def _wrap(item: Item) -> BoxNode:
    if isinstance(item, BoxNode):
        return item
    return BoxNode(item.t_s, item.t_e, item.h, item.h, [(item.id, 0)])


# -- time helpers ------------------------------------------------------------


def densest_instant(items: Iterable) -> float:
    """Midpoint of the first elementary interval with the most live items."""
    items = list(items)
    times = np.unique([t for it in items for t in (it.t_s, it.t_e)])
    delta = np.zeros(len(times), dtype=np.int64)
    np.add.at(delta, np.searchsorted(times, [it.t_s for it in items]), 1)
    np.subtract.at(delta, np.searchsorted(times, [it.t_e for it in items]), 1)
    live = np.cumsum(delta)[:-1]
    k = int(np.argmax(live))
    return (float(times[k]) + float(times[k + 1])) / 2


def random_live_moment(items: list, rng: random.Random, tries: int = 1000) -> float:
    """Seeded rejection sampling of a half-integer instant with load > 0."""
    spans = sorted((it.t_s, it.t_e) for it in items)
    merged = []
    for s, e in spans:
        if merged and s < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    starts = [s for s, _ in merged]
    lo, hi = 2 * int(math.floor(merged[0][0])), 2 * int(math.ceil(merged[-1][1]))
    for _ in range(tries):
        u = rng.randrange(lo + 1, hi) / 2
        k = bisect_right(starts, u) - 1
        if k >= 0 and merged[k][0] < u < merged[k][1]:
            return u
    return densest_instant(items)


# -- unit-height boxing --------------------------------------------------------


def box_at_instant(jobs_live_at_t: list, t, capacity: int):
    """Box items that are all live at ``t`` in groups of exactly ``capacity``.

    Items are taken by increasing start (ties: later end first, then id).
    The incomplete last group is returned unresolved, so it holds at most
    ``capacity - 1`` items.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    order = sorted(jobs_live_at_t, key=lambda x: (x.t_s, -x.t_e, _order_key(x)))
    n_full = len(order) // capacity * capacity
    boxes = []
    for k in range(0, n_full, capacity):
        group = order[k : k + capacity]
        boxes.append(
            BoxNode(
                min(x.t_s for x in group),
                max(x.t_e for x in group),
                capacity,
                1,
                [(_ref(x), row) for row, x in enumerate(group)],
            )
        )
    return boxes, order[n_full:]


def igc_group(items: list, capacity: int) -> list:
    """Color items and cut the colors into boxes of ``capacity`` rows."""
    if not items:
        return []
    coloring = igc_color(IntervalItem(pos, it.t_s, it.t_e) for pos, it in enumerate(items))
    groups = {}
    for pos, it in enumerate(items):
        c = coloring.colors[pos]
        groups.setdefault(c // capacity, []).append((it, c % capacity))
    boxes = []
    for g in sorted(groups):
        members = groups[g]
        boxes.append(
            BoxNode(
                min(it.t_s for it, _ in members),
                max(it.t_e for it, _ in members),
                capacity,
                1,
                [(_ref(it), row) for it, row in members],
            )
        )
    return boxes


def box_unit(
    unit_jobs: list,
    bounds,
    capacity: int,
    depth: int = 0,
    rng_seed: Optional[int] = None,
    *,
    ctx: Optional[_Run] = None,
    inject_inline: bool = False,
) -> list:
    """Box unit-height items into boxes of ``capacity`` rows.

    Items live at some critical time (the earliest one is used) are boxed
    by :func:`box_at_instant`; its leftovers are colored and grouped. The groups'
    endpoints become new critical times for the items left over, which are
    handled one level deeper.

    Raises a ``EmptyR`` signal carrying a suggested moment when no item is
    live at any critical time, unless ``inject_inline`` is set.
    """
    if capacity < 1:
        raise BASignal(CAPACITY_ZERO, detail="box_unit needs capacity >= 1")
    if ctx is None:
        ctx = _Run(random.Random(rng_seed or 0))
    if not unit_jobs:
        return []
    if depth > ctx.depth_limit:
        ctx.signals.append(DEPTH_EXCEEDED)
        log.debug("box_unit depth limit hit with %d items; boxing by IGC", len(unit_jobs))
        return igc_group(unit_jobs, capacity)

    crit = sorted(set(bounds))
    assigned, rest = _split_by_critical_times(unit_jobs, crit)
    if not assigned:
        moment = densest_instant(unit_jobs)
        if not inject_inline:
            raise BASignal(EMPTY_R, suggested_moment=moment, detail=f"depth {depth}")
        crit = sorted(set(crit) | {moment})
        assigned, rest = _split_by_critical_times(unit_jobs, crit)

    boxes, unresolved = [], []
    for t in sorted(assigned):
        b, u = box_at_instant(assigned[t], t, capacity)
        boxes.extend(b)
        unresolved.extend(u)
    u_boxes = igc_group(unresolved, capacity)
    boxes.extend(u_boxes)
    if not rest:
        return boxes

    new_crit = set(crit)
    for b in u_boxes:
        new_crit.update((b.t_s, b.t_e))
    if len(new_crit) == len(crit):
        # no new critical times: inject the densest instant of what is left
        new_crit.add(densest_instant(rest))
    boxes.extend(_box_unit_retrying(rest, new_crit, capacity, depth + 1, ctx))
    return boxes


def _split_by_critical_times(items, crit):
    assigned, rest = {}, []
    for it in items:
        k = bisect_right(crit, it.t_s)
        if k < len(crit) and crit[k] < it.t_e:
            assigned.setdefault(crit[k], []).append(it)
        else:
            rest.append(it)
    return assigned, rest


def _box_unit_retrying(items, bounds, capacity, depth, ctx):
    try:
        return box_unit(items, bounds, capacity, depth, ctx=ctx)
    except BASignal as sig:
        if sig.kind != EMPTY_R:
            raise
        ctx.signals.append(EMPTY_R)
        bounds = set(bounds) | {sig.suggested_moment}
        return box_unit(items, bounds, capacity, depth, ctx=ctx, inject_inline=True)


# -- mixed heights -------------------------------------------------------------


def bucket_index(h: int, epsilon: float) -> int:
    """Smallest ``i >= 0`` with ``h <= (1 + epsilon) ** i``."""
    base = 1.0 + epsilon
    i = max(0, math.ceil(math.log(h) / math.log(base)))
    while base**i < h:
        i += 1
    while i > 0 and base ** (i - 1) >= h:
        i -= 1
    return i


def rounded_height(i: int, epsilon: float) -> int:
    return math.floor((1.0 + epsilon) ** i)


def box_buckets(jobs: list, epsilon: float, H: int, *, ctx: Optional[_Run] = None) -> list:
    """Pack items no taller than ``epsilon * H`` into boxes of height exactly ``H``.

    Each height class is rounded up, treated as unit height, packed by
    :func:`box_unit` with ``H // rounded`` rows, and scaled back up.
    """
    if ctx is None:
        ctx = _Run(random.Random(0))
    if not jobs:
        return []
    if epsilon <= 0 or H < 1:
        raise ValueError("box_buckets needs epsilon > 0 and H >= 1")

    buckets = {}
    for it in jobs:
        buckets.setdefault(bucket_index(it.h, epsilon), []).append(it)

    out = []
    for i in sorted(buckets):
        members = buckets[i]
        h_i = rounded_height(i, epsilon)
        rows = H // h_i
        too_tall = [it for it in members if it.h > epsilon * H]
        if rows == 0 or too_tall:
            raise BASignal(
                CAPACITY_ZERO,
                detail=f"bucket {i} (height {h_i}) vs H={H}, {len(too_tall)} items above epsilon*H",
            )
        bounds = {
            min(it.t_s for it in members),
            max(it.t_e for it in members),
            random_live_moment(members, ctx.rng),
        }
        for box in _box_unit_retrying(members, bounds, rows, 0, ctx):
            box.row_unit = h_i
            box.height = H
            out.append(box)
    return out


def _boxed_leaves(items) -> int:
    return sum(it.leaf_count for it in items if isinstance(it, BoxNode))


def box_mixed(jobs: list, epsilon: float, *, ctx: Optional[_Run] = None) -> list:
    """Box a mixed set of items into boxes of a single height.

    The small items (height at most ``mu * H``) are packed by
    :func:`box_buckets` and merged back with the large ones, repeating
    while ``log(r)**2 >= 1 / epsilon``; a last :func:`box_buckets` pass
    then evens out the remaining heights.
    """
    if ctx is None:
        ctx = _Run(random.Random(0))
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    items = list(jobs)
    if not items:
        return []

    depth = 0
    while True:
        heights = [it.h for it in items]
        h_min, h_max = min(heights), max(heights)
        if h_min == h_max:
            return [_wrap(it) for it in items]
        params = ba_params(h_min, h_max, epsilon, ctx.log_base)
        small = [it for it in items if it.h <= params.threshold]
        large = [it for it in items if it.h > params.threshold]
        if not small:
            raise BASignal(
                EMPTY_SMALL_SET,
                boxed_count=ctx.boxed,
                detail=f"threshold {params.threshold:.4g} < h_min {h_min}",
            )
        try:
            boxes = box_buckets(small, params.mu, params.H, ctx=ctx)
        except BASignal as sig:
            sig.boxed_count = max(sig.boxed_count, ctx.boxed)
            raise
        items = boxes + large
        ctx.boxed = max(ctx.boxed, _boxed_leaves(items))

        heights = [it.h for it in items]
        h_min, h_max = min(heights), max(heights)
        if h_min == h_max:
            return [_wrap(it) for it in items]
        if math.log(h_max / h_min, ctx.log_base) ** 2 >= 1.0 / epsilon:
            depth += 1
            if depth > ctx.depth_limit:
                raise BASignal(DEPTH_EXCEEDED, boxed_count=ctx.boxed, detail="box_mixed recursion")
            continue

        # Final pass: error parameter epsilon, height large enough that
        # every item fits (h <= epsilon * H) and every class gets a row.
        top_class = rounded_height(bucket_index(h_max, epsilon), epsilon)
        H_final = max(math.ceil(h_max / epsilon), top_class)
        try:
            boxes = box_buckets(items, epsilon, H_final, ctx=ctx)
        except BASignal as sig:
            sig.boxed_count = max(sig.boxed_count, ctx.boxed)
            raise
        ctx.boxed = max(ctx.boxed, _boxed_leaves(boxes))
        return boxes


# -- unboxing and tightening -------------------------------------------------


class MalformedForest(ValueError):
    pass


def unbox(placed_boxes: list, jobs: Iterable, label: str = "idealloc") -> Placement:
    """Place each child at ``parent + row * row_unit``, down to the jobs.

    Jobs keep their original heights. Every job in ``jobs`` must appear
    exactly once in the forest.
    """
    by_id = {j.id: j for j in jobs}
    placed = {}
    stack = list(placed_boxes)
    while stack:
        box, addr = stack.pop()
        for child, row in box.children:
            child_addr = addr + row * box.row_unit
            if isinstance(child, BoxNode):
                stack.append((child, child_addr))
                continue
            if child in placed:
                raise MalformedForest(f"job {child} appears twice")
            if child not in by_id:
                raise MalformedForest(f"unknown job {child}")
            j = by_id[child]
            placed[child] = PlacedJob(j.id, j.t_s, j.t_e, j.h, child_addr)
    missing = set(by_id) - set(placed)
    if missing:
        raise MalformedForest(f"{len(missing)} jobs missing from forest, e.g. {min(missing)}")
    return Placement([placed[j] for j in sorted(placed)], label)


def tighten(placement: Placement) -> Placement:
    """Re-stack jobs in address order onto the highest coinciding predecessor.

    Jobs are visited by increasing address (ties: start time, id). Each
    lands on the highest top among already-visited jobs whose lifetimes
    overlap its own, or at zero if there are none.
    """
    require_valid(placement.jobs)
    order = sorted(placement.jobs, key=lambda j: (j.p, j.t_s, j.id))
    n = len(order)
    ts = np.array([j.t_s for j in order], dtype=np.int64)
    te = np.array([j.t_e for j in order], dtype=np.int64)
    tops = np.zeros(n, dtype=np.int64)
    out = []
    for k, j in enumerate(order):
        if k:
            hit = (ts[:k] < j.t_e) & (j.t_s < te[:k])
            addr = int(tops[:k][hit].max()) if hit.any() else 0
        else:
            addr = 0
        tops[k] = addr + j.h
        out.append(PlacedJob(j.id, j.t_s, j.t_e, j.h, addr))
    out.sort(key=lambda j: j.id)
    return Placement(out, placement.label)


# -- driver ------------------------------------------------------------------


def _attempt_seed(seed: int, iteration: int) -> int:
    digest = hashlib.sha256(f"{seed}:{iteration}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def place_boxes(boxes: list) -> list:
    """Optimal placement of uniform-height boxes by interval coloring."""
    if not boxes:
        return []
    height = boxes[0].height
    if any(b.height != height for b in boxes):
        raise ValueError("outer boxes must share one height")
    addrs = igc_place_uniform(
        (IntervalItem(k, b.t_s, b.t_e) for k, b in enumerate(boxes)), height
    )
    return [(b, addrs[k]) for k, b in enumerate(boxes)]


def run_ba(jobs, config: Optional[BAConfig] = None):
    """Compute an offline placement; returns ``(placement, diagnostics)``.

    Raises :class:`RetriesExhausted` (with ``.diagnostics``) when no error
    parameter converged within ``config.max_iterations`` attempts.
    """
    config = config or BAConfig()
    jobs = list(jobs)
    diag = RunDiagnostics()
    if not jobs:
        return Placement([], "idealloc"), diag

    ctrl = EpsilonController(initial_epsilon(load_profile(jobs)), max_iterations=config.max_iterations)
    while True:
        ctx = _Run(
            random.Random(_attempt_seed(config.seed, ctrl.iteration)),
            depth_limit=config.depth_limit,
            log_base=config.log_base,
        )
        diag.iterations = ctrl.iteration + 1
        diag.final_epsilon = ctrl.epsilon
        try:
            boxes = box_mixed(jobs, ctrl.epsilon, ctx=ctx)
        except BASignal as sig:
            diag.signals.extend(ctx.signals)
            diag.signals.append(sig.kind)
            diag.boxed_count_history.append(sig.boxed_count)
            log.info("epsilon %.4g failed with %s (%d boxed)", ctrl.epsilon, sig.kind, sig.boxed_count)
            try:
                ctrl.next_epsilon(sig.boxed_count)
            except RetriesExhausted as exc:
                diag.bottom_limit = ctrl.bottom_limit
                exc.diagnostics = diag
                raise
            continue
        diag.signals.extend(ctx.signals)
        diag.boxed_count_history.append(len(jobs))
        diag.bottom_limit = ctrl.bottom_limit
        break

    placement = tighten(unbox(place_boxes(boxes), jobs))
    require_valid(placement.jobs)
    return placement, diag
