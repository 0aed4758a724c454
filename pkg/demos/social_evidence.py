"""
Evidence on a social network
============================

Smokes, Asthma and Friends over N people. Observing more unary randvars
cuts the model into more pieces at first, then lets whole groups be
absorbed; runtimes rise and then fall again as the evidence fraction
goes to 100%.
"""

import csv
import sys

from liftedve.bench import BenchmarkSpec, generate_benchmark, plot_data, run_bench
from liftedve.engine import Engine

N = int(sys.argv[1]) if len(sys.argv) > 1 else 200

# %% what evidence incorporation leaves behind
for frac in (0.0, 0.2, 0.6, 1.0):
    model, ev, q = generate_benchmark(BenchmarkSpec("social", N, evidence_frac=frac))
    e = Engine(model, ev, log_space=True)
    e.prepare(q)
    print(f"{int(frac * 100):>3}% observed: {len(ev):>4} observations, {len(e.pf):>3} parfactors, query {q}")

# %% a runtime series, ready for a log-scale plot
rows = plot_data("social", [N // 4, N // 2, N], fracs=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
w = csv.DictWriter(sys.stdout, fieldnames=["N", "evidenceFrac", "meanRuntimeMs", "opCount"], extrasaction="ignore")
w.writeheader()
w.writerows(rows)

# %% a small case against the ground oracle
print(run_bench(BenchmarkSpec("social", 4, evidence_frac=0.2), oracle=True))
