"""Render first-fit and offline placements of one workload side by side.

Writes ``first-fit.svg`` and ``idealloc.svg`` to the directory given as
the first argument (default: the current directory).
"""

import sys
from pathlib import Path

import numpy as np

from dsapack.baseline import simulate
from dsapack.boxing import run_ba
from dsapack.metrics import makespan
from dsapack.report import render_svg
from dsapack.trace import Lifetime, Uniform, generate_trace, jobs_from_trace

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
trace = generate_trace(300, Uniform(64, 2048), Lifetime(mean=20), seed=3)

ff = simulate(trace)
ideal, _ = run_ba(jobs_from_trace(trace).jobs)

# Same pixel box for both so the heights are comparable by eye.
for placement in (ff, ideal):
    path = out / f"{placement.label}.svg"
    path.write_text(render_svg(placement, page_gridlines=True, width_px=900, height_px=450))
    tops = np.array([j.top for j in placement])
    print(f"{path}: makespan {makespan(placement.jobs)}, median job top {int(np.median(tops))}")
