"""Brute-force reference computations, independent of the code under test."""

import numpy as np

from dsapack.metrics import PlacedJob


def max_overlap_bruteforce(intervals):
    """Max number of open intervals sharing a point, by probing every half-integer."""
    if not intervals:
        return 0
    lo = min(s for s, _ in intervals)
    hi = max(e for _, e in intervals)
    best = 0
    for k in range(2 * lo, 2 * hi + 1):
        t = k / 2
        best = max(best, sum(1 for s, e in intervals if s < t < e))
    return best


def _clash(x, y):
    time = max(x.t_s, y.t_s) < min(x.t_e, y.t_e)
    space = max(x.p, y.p) < min(x.p + x.h, y.p + y.h)
    return time and space


def conflicts_bruteforce(jobs):
    out = []
    for a in range(len(jobs)):
        for b in range(a + 1, len(jobs)):
            if _clash(jobs[a], jobs[b]):
                out.append(tuple(sorted((jobs[a].id, jobs[b].id))))
    return sorted(out)


def gap_area_dense(jobs, page_size, n_addr=None):
    """Gap area on a unit (time x address) grid.

    Cell (t, a) covers the instant interval (t, t + 1) and byte a. A free
    byte at or above the lowest used address is a gap when some byte above
    it in the same page is occupied.
    """
    if not jobs:
        return 0
    t_end = max(j.t_e for j in jobs)
    if n_addr is None:
        n_addr = max(j.p + j.h for j in jobs)
    n_addr = -(-n_addr // page_size) * page_size
    grid = np.zeros((t_end, n_addr), dtype=bool)
    for j in jobs:
        grid[j.t_s : j.t_e, j.p : j.p + j.h] = True
    pages = grid.reshape(t_end, n_addr // page_size, page_size)
    # occupied somewhere strictly above, within the page
    above = np.flip(np.cumsum(np.flip(pages, axis=2), axis=2), axis=2) - pages
    gaps = (~pages) & (above > 0)
    gaps = gaps.reshape(t_end, n_addr)
    gaps[:, : min(j.p for j in jobs)] = False
    return int(gaps.sum())


def random_valid_placement(rng, n_jobs, t_max, addr_max, h_max, tries=50):
    """Rejection-sample jobs into free spots; returns a conflict-free list."""
    jobs = []
    for i in range(n_jobs):
        for _ in range(tries):
            t_s = int(rng.integers(0, t_max - 1))
            t_e = int(rng.integers(t_s + 1, t_max + 1))
            h = int(rng.integers(1, h_max + 1))
            if h > addr_max:
                continue
            p = int(rng.integers(0, addr_max - h + 1))
            cand = PlacedJob(len(jobs), t_s, t_e, h, p)
            if not any(_clash(cand, other) for other in jobs):
                jobs.append(cand)
                break
    return jobs
