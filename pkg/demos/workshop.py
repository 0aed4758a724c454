"""
Workshop attendance, lifted and ground
======================================

N people may attend a workshop. Whether the workshop becomes a series
depends on attendance, and attendance depends on the topic. Ground
variable elimination touches every person; the lifted engine handles them
as one group, so its operator count does not move when N grows.
"""

import time

from liftedve.engine import run_query
from liftedve.ground import ground_model, ve_marginal
from liftedve.modelio import parse_model

TEMPLATE = """\
DOMAINS
Person = p..{n}

PREDICATES
Attends(Person) : {{true, false}}
Series : {{true, false}}
Topic : {{srl, db}}

PARFACTORS
factor Attends(X), Series | all
  true true 1
  true false 2
  false true 2
  false false 1
factor Topic, Attends(X) | all
  srl true 3
  srl false 1
  db true 2
  db false 2
"""

series = ("Series", ())

# %% a small instance, checked against the ground oracle
model = parse_model(TEMPLATE.format(n=6))
res = run_query(model, series, trace=True)
print("operators applied:")
for line in res.trace:
    print("  ", line)
print(res)
print("ground VE:", ve_marginal(ground_model(model), series))

# %% evidence about one person
ev = {("Attends", ("p1",)): "true"}
print(run_query(model, series, ev))
print("ground VE:", ve_marginal(ground_model(model, ev), series))

# %% growing the population
print(f"{'N':>6} {'ops':>4} {'ms':>8}  P(Series=true)")
for n in (10, 100, 1000, 10000):
    m = parse_model(TEMPLATE.format(n=n))
    t0 = time.perf_counter()
    r = run_query(m, series, log_space=True)
    ms = (time.perf_counter() - t0) * 1000
    print(f"{n:>6} {r.op_count:>4} {ms:>8.1f}  {r.distribution['true']:.6g}")
