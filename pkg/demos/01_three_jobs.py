"""A three-allocation trace, walked through end to end.

Run with ``python3 demos/01_three_jobs.py``.
"""

from dsapack.metrics import (
    PlacedJob,
    Placement,
    fragmentation,
    load_profile,
    makespan,
    validate_placement,
)
from dsapack.baseline import simulate
from dsapack.trace import jobs_from_trace, parse_trace

# Three requests: A (1 byte), B (2 bytes), then A is freed and C (3 bytes)
# arrives. The clock only moves on allocations.
TEXT = """\
a 0 1
a 1 2
f 0
a 2 3
f 1
f 2
"""

trace = parse_trace(TEXT, name="three-jobs")
jobs = jobs_from_trace(trace)
for j in jobs:
    print(f"job {j.id}: lives ({j.t_s}, {j.t_e}), {j.h} bytes")

prof = load_profile(jobs.jobs)
print(f"\nmax load L = {prof.L} around t = {prof.t_L}, total load = {prof.total_load}")

# A hand-made placement: C at the bottom, A above it, B on top.
hand = Placement(
    [PlacedJob(0, 0, 3, 1, 1), PlacedJob(1, 1, 6, 2, 3), PlacedJob(2, 3, 6, 3, 0)],
    "by hand",
)
print(f"\nby hand: conflicts {validate_placement(hand.jobs)}, makespan {makespan(hand.jobs)}")
frag = fragmentation(hand.jobs, page_size=4096)
print(f"  gap area {frag.gap_area} in {frag.gap_count} regions, F = {frag.F:.4f}")

# First-fit cannot reuse A's hole for C and ends one byte taller.
ff = simulate(trace)
print(f"\nfirst-fit: {[(j.id, j.p) for j in ff]}, makespan {makespan(ff.jobs)}")
print(f"  F = {fragmentation(ff.jobs).F:.4f}")
