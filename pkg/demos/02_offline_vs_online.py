"""Offline boxing against first-fit and best-fit on a synthetic workload.

Prints the comparison table as CSV. Pass a seed as the first argument to
try another workload.
"""

import sys

from dsapack.baseline import BEST_FIT, FIRST_FIT, simulate
from dsapack.boxing import BAConfig, run_ba
from dsapack.report import ORACLE_LABEL, compare, comparison_to_csv
from dsapack.trace import Lifetime, Pareto, generate_trace, jobs_from_trace

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

# Heavy-tailed sizes look more like real heaps than uniform ones.
trace = generate_trace(1500, Pareto(16, 1.2, 1 << 16), Lifetime(mean=32), seed=seed)
jobs = jobs_from_trace(trace)

ideal, diag = run_ba(jobs.jobs, BAConfig(seed=seed))
print(f"# boxing converged after {diag.iterations} attempt(s), final epsilon {diag.final_epsilon:.3f}")

rows = compare(
    [
        (ORACLE_LABEL, ideal),
        (FIRST_FIT, simulate(trace, policy=FIRST_FIT)),
        (BEST_FIT, simulate(trace, policy=BEST_FIT)),
    ],
    workload=f"pareto-{seed}",
)
sys.stdout.write(comparison_to_csv(rows))
