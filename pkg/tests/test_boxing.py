import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsapack.boxing import (
    CAPACITY_ZERO,
    EMPTY_R,
    EMPTY_SMALL_SET,
    BAConfig,
    BASignal,
    BoxNode,
    EpsilonController,
    MalformedForest,
    RetriesExhausted,
    _Run,
    ba_params,
    bucket_index,
    box_buckets,
    densest_instant,
    initial_epsilon,
    box_at_instant,
    place_boxes,
    rounded_height,
    run_ba,
    box_mixed,
    box_unit,
    tighten,
    unbox,
)
from dsapack.metrics import LoadProfile, PlacedJob, Placement, is_valid, load_profile, makespan
from dsapack.trace import Job, Uniform, Pareto, generate_trace, jobs_from_trace

from oracles import random_valid_placement

EXAMPLE_JOBS = [Job(0, 0, 3, 1), Job(1, 1, 6, 2), Job(2, 3, 6, 3)]


def profile(L, h_max):
    return LoadProfile(L, 0.0, 0, h_max, 1)


def leaves(boxes):
    return sorted(i for b in boxes for i in b.job_ids())


def check_box(box):
    """Children fit in time and rows, same-row children are time-disjoint."""
    rows = box.height // box.row_unit
    by_row = {}
    for child, row in box.children:
        c = child if isinstance(child, BoxNode) else None
        span = (c.t_s, c.t_e) if c else None
        assert 0 <= row < rows
        if c:
            assert box.t_s <= c.t_s and c.t_e <= box.t_e
            assert c.height <= box.row_unit
            check_box(c)
        by_row.setdefault(row, []).append(span)
    return by_row


# -- epsilon -----------------------------------------------------------------


def test_initial_epsilon():
    assert initial_epsilon(profile(1024, 32)) == pytest.approx(2 ** (-5 / 7))
    assert initial_epsilon(profile(77, 77)) == 1.0
    assert initial_epsilon(profile(4919904, 528376)) == pytest.approx(0.72706, abs=1e-5)


def test_next_epsilon_grows_by_ten_percent():
    ctrl = EpsilonController(0.5)
    assert ctrl.next_epsilon(0) == pytest.approx(0.55)
    assert ctrl.iteration == 1


def test_next_epsilon_wraps_to_bottom():
    ctrl = EpsilonController(1.9, bottom_limit=0.9, best_boxed_count=10)
    assert ctrl.next_epsilon(0) == pytest.approx(0.9)


def test_next_epsilon_keeps_record_as_bottom():
    ctrl = EpsilonController(1.3, best_boxed_count=4)
    ctrl.next_epsilon(9)
    assert ctrl.bottom_limit == 1.3
    assert ctrl.best_boxed_count == 9
    ctrl.next_epsilon(5)
    assert ctrl.bottom_limit == 1.3


def test_next_epsilon_budget():
    ctrl = EpsilonController(0.5, max_iterations=3)
    ctrl.next_epsilon(0)
    ctrl.next_epsilon(0)
    with pytest.raises(RetriesExhausted):
        ctrl.next_epsilon(0)


# -- threshold parameters ------------------------------------------------------

ADJUSTMENT_ROWS = [
    # h_min, h_max, (eps_t, h_t), (eps_p, h_p)
    (8, 524288, (0.76, 0.033), (6.19, 8.27)),
    (8, 1048576, (0.97, 0.037), (6.55, 10.01)),
    (16, 524288, (0.75, 0.037), (6.12, 18.91)),
    (8, 75497472, (0.98, 0.020), (6.59, 9.62)),
]


@pytest.mark.parametrize("h_min, h_max, theoretical, practical", ADJUSTMENT_ROWS)
def test_threshold_table(h_min, h_max, theoretical, practical):
    assert ba_params(h_min, h_max, practical[0]).threshold == pytest.approx(practical[1], rel=5e-3)
    assert ba_params(h_min, h_max, theoretical[0]).threshold == pytest.approx(theoretical[1], rel=0.05)
    assert ba_params(h_min, h_max, theoretical[0]).threshold < h_min


def test_ba_params_first_row():
    p = ba_params(8, 524288, 6.19)
    assert p.mu == pytest.approx(0.2669, abs=1e-4)
    assert p.H == 31


def test_box_mixed_empty_small_set():
    jobs = [Job(0, 0, 10, 8), Job(1, 5, 20, 524288)]
    with pytest.raises(BASignal) as info:
        box_mixed(jobs, 0.76)
    assert info.value.kind == EMPTY_SMALL_SET


def test_box_mixed_uniform_bypass():
    jobs = [Job(i, i, i + 10, 4) for i in range(5)]
    boxes = box_mixed(jobs, 0.5)
    assert len(boxes) == 5
    assert all(b.height == 4 and len(b.children) == 1 for b in boxes)


def test_box_mixed_uniform_output():
    js = jobs_from_trace(generate_trace(300, Uniform(8, 512), seed=5))
    ctx = _Run(random.Random(1))
    for eps in [x / 10 for x in range(15, 80)]:
        try:
            boxes = box_mixed(js.jobs, eps, ctx=ctx)
        except BASignal:
            continue
        assert len({b.height for b in boxes}) == 1
        assert leaves(boxes) == sorted(j.id for j in js)
        for b in boxes:
            check_box(b)
        return
    pytest.fail("no epsilon converged")


# -- height buckets ------------------------------------------------------------


def test_buckets():
    got = {h: (bucket_index(h, 0.5), rounded_height(bucket_index(h, 0.5), 0.5)) for h in (2, 3, 4, 5, 9)}
    assert got == {2: (2, 2), 3: (3, 3), 4: (4, 5), 5: (4, 5), 9: (6, 11)}


@given(st.integers(1, 10**9), st.floats(0.01, 10))
def test_rounding_never_shrinks(h, eps):
    i = bucket_index(h, eps)
    assert rounded_height(i, eps) >= h
    assert i == 0 or (1 + eps) ** (i - 1) < h


def test_box_buckets_boxes_height_H():
    jobs = [Job(i, i, i + 20, h) for i, h in enumerate([2, 3, 4, 5, 9, 9, 2])]
    boxes = box_buckets(jobs, 0.5, 24)
    assert all(b.height == 24 for b in boxes)
    assert leaves(boxes) == list(range(7))
    for b in boxes:
        assert (24 // b.row_unit) * b.row_unit <= 24
        check_box(b)


def test_box_buckets_empty():
    assert box_buckets([], 0.5, 10) == []


def test_box_buckets_capacity_zero():
    with pytest.raises(BASignal) as info:
        box_buckets([Job(0, 0, 5, 9)], 2.0, 5)
    assert info.value.kind == CAPACITY_ZERO


# -- unit-height boxing --------------------------------------------------------


def test_box_at_instant_example():
    a, b, c, e, d = (Job(0, 1, 12, 1), Job(1, 2, 11, 1), Job(2, 3, 13, 1), Job(4, 8, 15, 1), Job(3, 9, 14, 1))
    boxes, u = box_at_instant([d, c, a, e, b], 10, 2)
    assert [(x.t_s, x.t_e) for x in boxes] == [(1, 12), (3, 15)]
    assert [[i for i, _ in x.children] for x in boxes] == [[0, 1], [2, 4]]
    assert u == [d]


def test_box_at_instant_small_and_empty():
    jobs = [Job(0, 0, 5, 1), Job(1, 1, 5, 1)]
    assert box_at_instant(jobs, 2, 3) == ([], sorted(jobs, key=lambda j: j.t_s))
    assert box_at_instant([], 0, 4) == ([], [])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_box_at_instant_properties(seed, H):
    rng = np.random.default_rng(seed)
    t = 50
    jobs = [Job(i, int(rng.integers(0, t)), int(rng.integers(t + 1, 100)), 1) for i in range(int(rng.integers(0, 30)))]
    boxes, u = box_at_instant(jobs, t, H)
    assert sorted([i for b in boxes for i, _ in b.children] + [j.id for j in u]) == [j.id for j in jobs]
    assert all(len(b.children) == H for b in boxes)
    assert len(u) <= H - 1


def test_box_unit_empty():
    assert box_unit([], {0, 10}, 3) == []


def test_box_unit_one_level():
    jobs = [Job(i, i, 20 + i, 1) for i in range(5)]
    ctx = _Run(random.Random(0))
    boxes = box_unit(jobs, {0, 30, 10.5}, 8, ctx=ctx)
    assert len(boxes) == 1
    assert leaves(boxes) == list(range(5))
    assert ctx.signals == []


def test_box_unit_empty_r():
    with pytest.raises(BASignal) as info:
        box_unit([Job(0, 3, 6, 1)], {0, 2, 6}, 2)
    assert info.value.kind == EMPTY_R
    assert 3 < info.value.suggested_moment < 6


def test_box_unit_inline_injection():
    boxes = box_unit([Job(0, 3, 6, 1)], {0, 2, 6}, 2, inject_inline=True)
    assert leaves(boxes) == [0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_box_unit_boxes_every_job_once(seed, H):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 80))
    starts = rng.integers(0, 200, size=n)
    jobs = [Job(i, int(s), int(s + rng.integers(1, 40)), 1) for i, s in enumerate(starts)]
    t0 = min(j.t_s for j in jobs)
    boxes = box_unit(jobs, {t0, max(j.t_e for j in jobs), densest_instant(jobs)}, H, ctx=_Run(random.Random(seed)))
    assert leaves(boxes) == list(range(n))
    for b in boxes:
        assert b.height == H
        by_row = {}
        for child, row in b.children:
            j = jobs[child]
            assert b.t_s <= j.t_s and j.t_e <= b.t_e
            by_row.setdefault(row, []).append(j)
        for row_jobs in by_row.values():
            row_jobs.sort(key=lambda j: j.t_s)
            assert all(x.t_e <= y.t_s for x, y in zip(row_jobs, row_jobs[1:]))


def test_box_unit_depth_limit_falls_back():
    jobs = [Job(i, 10 * i, 10 * i + 5, 1) for i in range(30)]
    ctx = _Run(random.Random(0), depth_limit=2)
    boxes = box_unit(jobs, {0, 1000, 2.5}, 1, ctx=ctx)
    assert leaves(boxes) == list(range(30))
    assert "DepthExceeded" in ctx.signals


# -- unbox / tighten ---------------------------------------------------------


def test_unbox_rows():
    jobs = [Job(0, 0, 5, 5), Job(1, 0, 5, 3)]
    box = BoxNode(0, 5, 15, 5, [(0, 0), (1, 2)])
    placed = unbox([(box, 40)], jobs)
    assert {j.id: j.p for j in placed} == {0: 40, 1: 50}
    assert {j.id: j.h for j in placed} == {0: 5, 1: 3}


def test_unbox_nested_and_singleton():
    jobs = [Job(7, 0, 4, 2)]
    inner = BoxNode(0, 4, 2, 2, [(7, 0)])
    assert unbox([(inner, 9)], jobs).jobs == [PlacedJob(7, 0, 4, 2, 9)]
    outer = BoxNode(0, 4, 10, 2, [(inner, 3)])
    assert unbox([(outer, 100)], jobs).jobs[0].p == 106


def test_unbox_rejects_malformed():
    jobs = [Job(0, 0, 5, 1), Job(1, 0, 5, 1)]
    with pytest.raises(MalformedForest):
        unbox([(BoxNode(0, 5, 2, 1, [(0, 0), (0, 1)]), 0)], jobs)
    with pytest.raises(MalformedForest):
        unbox([(BoxNode(0, 5, 2, 1, [(0, 0)]), 0)], jobs)


def test_tighten_examples():
    assert tighten(Placement([PlacedJob(0, 0, 5, 4, 100)])).jobs[0].p == 0
    got = tighten(Placement([PlacedJob(0, 0, 5, 2, 10), PlacedJob(1, 2, 8, 3, 20)]))
    assert [j.p for j in got] == [0, 2]
    got = tighten(Placement([PlacedJob(0, 0, 5, 2, 10), PlacedJob(1, 5, 8, 3, 20)]))
    assert [j.p for j in got] == [0, 0]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_tighten_properties(seed):
    rng = np.random.default_rng(seed)
    jobs = random_valid_placement(rng, 20, 50, 80, 12)
    before = Placement(jobs)
    after = tighten(before)
    assert is_valid(after.jobs)
    old = before.by_id()
    assert all(j.p <= old[j.id].p for j in after)
    assert makespan(after.jobs) <= makespan(before.jobs)
    again = tighten(after)
    assert tighten(again).jobs == again.jobs


# -- run_ba ------------------------------------------------------------------


def test_run_ba_example():
    placement, diag = run_ba(EXAMPLE_JOBS)
    assert is_valid(placement.jobs)
    assert sorted((j.id, j.h) for j in placement) == [(0, 1), (1, 2), (2, 3)]
    assert makespan(placement.jobs) >= 5
    assert diag.iterations >= 1


def test_run_ba_empty():
    placement, diag = run_ba([])
    assert placement.jobs == [] and makespan(placement.jobs) == 0


def test_run_ba_clique_uniform_heights():
    jobs = [Job(i, i, 100, 6) for i in range(9)]
    placement, _ = run_ba(jobs)
    assert makespan(placement.jobs) == 9 * 6


def test_run_ba_deterministic():
    js = jobs_from_trace(generate_trace(400, Pareto(16, 1.2), seed=11))
    a, da = run_ba(js.jobs, BAConfig(seed=3))
    b, db = run_ba(js.jobs, BAConfig(seed=3))
    assert a.jobs == b.jobs
    assert da.to_json() == db.to_json()


def test_run_ba_retries_exhausted_carries_diagnostics():
    jobs = [Job(0, 0, 10, 8), Job(1, 5, 20, 524288)]
    with pytest.raises(RetriesExhausted) as info:
        run_ba(jobs, BAConfig(max_iterations=3))
    diag = info.value.diagnostics
    assert diag.iterations == 3
    assert diag.signals == [EMPTY_SMALL_SET] * 3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([Uniform(8, 512), Uniform(1, 64), Pareto(8, 1.0, 50_000)]))
def test_run_ba_soundness(seed, dist):
    js = jobs_from_trace(generate_trace(150, dist, seed=seed))
    try:
        placement, _ = run_ba(js.jobs, BAConfig(seed=seed))
    except RetriesExhausted:
        return
    assert is_valid(placement.jobs)
    assert sorted((j.id, j.t_s, j.t_e, j.h) for j in placement) == sorted((j.id, j.t_s, j.t_e, j.h) for j in js)
    assert makespan(placement.jobs) >= load_profile(js.jobs).L


def test_place_boxes_rejects_mixed_heights():
    with pytest.raises(ValueError):
        place_boxes([BoxNode(0, 1, 2, 2, [(0, 0)]), BoxNode(0, 1, 3, 3, [(1, 0)])])
