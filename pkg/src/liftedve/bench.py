"""Synthetic benchmark families and the CSV harness around them.

Families:
  workshop-attrs  phi_i(Attends(X), Attr_i) for i=1..m, phi_{m+1}(Attends(X), Series)
  competing       phi_1(Attends(X), Hot(Y)), phi_2(Attends(X), Series)
  social          phi_1(Smokes(X)), phi_2(Asthma(X)), phi_3(Friends(X,Y)),
                  phi_4(Asthma(X), Smokes(X)), phi_5(Asthma(X), Friends(X,Y), Smokes(Y))

Evidence goes on unary randvars only, with uniformly drawn values.
"""

from __future__ import annotations

import csv
import math
import random
import statistics
import sys
from dataclasses import dataclass

import numpy as np

from .constraint import ConstraintTree
from .core import Atom, Domain, Model, Parfactor, Potential, Predicate
from .engine import run_query
from .errors import InputError, SizeError
from .ground import ground_model, ve_marginal

FAMILIES = ("workshop-attrs", "competing", "social")
BOOL = ("true", "false")
COLUMNS = ["family", "N", "evidenceFrac", "seed", "runtimeMs", "opCount", "rowsCreated", "marginal"]


@dataclass(frozen=True)
class BenchmarkSpec:
    family: str
    N: int
    m: int = 2
    M: int | None = None  # workshops for the competing family; defaults to N
    evidence_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; pick one of {', '.join(FAMILIES)}")
        if self.N < 1:
            raise InputError("domain size must be positive")
        if not 0.0 <= self.evidence_frac <= 1.0:
            raise InputError("evidence fraction must lie in [0, 1]")


def _potential(rng, ranges):
    shape = tuple(len(r) for r in ranges)
    # 1 - U[0,1) lies in (0, 1]
    vals = [1.0 - rng.random() for _ in range(math.prod(shape))]
    return Potential(ranges, np.array(vals).reshape(shape))


def _pf(rng, atoms, C):
    return Parfactor(atoms, C, _potential(rng, [a.pred.range for a in atoms]))


def people(n, prefix="p"):
    return Domain("Person" if prefix == "p" else "Topic", tuple(f"{prefix}{i}" for i in range(1, n + 1)))


def _observe(rng, rvs, frac):
    k = round(frac * len(rvs))
    chosen = rng.sample(rvs, k)
    return {rv: rng.choice(BOOL) for rv in sorted(chosen)}


def generate_benchmark(spec):
    """(Model, evidence, query) for a BenchmarkSpec, deterministic in the seed."""
    rng = random.Random(f"{spec.family}:{spec.N}:{spec.m}:{spec.M}:{spec.evidence_frac}:{spec.seed}")
    P = people(spec.N)
    X = ("X",)
    CX = ConstraintTree.product(X, [P.constants])
    if spec.family == "workshop-attrs":
        attends = Predicate("Attends", (P,), BOOL)
        attrs = [Predicate(f"Attr{i}", (), BOOL) for i in range(1, spec.m + 1)]
        series = Predicate("Series", (), BOOL)
        pfs = [_pf(rng, [Atom(attends, X), Atom(a, ())], CX) for a in attrs]
        pfs.append(_pf(rng, [Atom(attends, X), Atom(series, ())], CX))
        model = Model([P], [attends, *attrs, series], pfs)
        unary = [("Attends", (c,)) for c in P.constants]
        evidence = _observe(rng, unary, spec.evidence_frac)
        return model, evidence, ("Series", ())
    if spec.family == "competing":
        W = people(spec.M or spec.N, prefix="t")
        attends = Predicate("Attends", (P,), BOOL)
        hot = Predicate("Hot", (W,), BOOL)
        series = Predicate("Series", (), BOOL)
        CXY = ConstraintTree.product(("X", "Y"), [P.constants, W.constants])
        pfs = [
            _pf(rng, [Atom(attends, X), Atom(hot, ("Y",))], CXY),
            _pf(rng, [Atom(attends, X), Atom(series, ())], CX),
        ]
        model = Model([P, W], [attends, hot, series], pfs)
        unary = [("Attends", (c,)) for c in P.constants]
        evidence = _observe(rng, unary, spec.evidence_frac)
        return model, evidence, ("Series", ())
    smokes = Predicate("Smokes", (P,), BOOL)
    asthma = Predicate("Asthma", (P,), BOOL)
    friends = Predicate("Friends", (P, P), BOOL)
    CXY = ConstraintTree.product(("X", "Y"), [P.constants, P.constants])
    pfs = [
        _pf(rng, [Atom(smokes, X)], CX),
        _pf(rng, [Atom(asthma, X)], CX),
        _pf(rng, [Atom(friends, ("X", "Y"))], CXY),
        _pf(rng, [Atom(asthma, X), Atom(smokes, X)], CX),
        _pf(rng, [Atom(asthma, X), Atom(friends, ("X", "Y")), Atom(smokes, ("Y",))], CXY),
    ]
    model = Model([P], [smokes, asthma, friends], pfs)
    unary = [(name, (c,)) for c in P.constants for name in ("Smokes", "Asthma")]
    evidence = _observe(rng, unary, spec.evidence_frac)
    free = [rv for rv in unary if rv not in evidence]
    if free:
        query = rng.choice(free)
    else:
        a, b = rng.choice(P.constants), rng.choice(P.constants)
        query = ("Friends", (a, b))
    return model, evidence, query


def max_rel_error(ref, got):
    return max(abs(got[k] - ref[k]) / max(abs(ref[k]), 1e-300) for k in ref)


def run_bench(spec, oracle=False, log_space=True, cap=None):
    """One CSV row (a dict) for ``spec``."""
    model, evidence, query = generate_benchmark(spec)
    res = run_query(model, query, evidence, log_space=log_space)
    first = model.predicate(query[0]).range[0]
    row = {
        "family": spec.family,
        "N": spec.N,
        "evidenceFrac": spec.evidence_frac,
        "seed": spec.seed,
        "runtimeMs": round(res.wall_time * 1000.0, 3),
        "opCount": res.op_count,
        "rowsCreated": res.rows_created,
        "marginal": repr(res.distribution[first]),
    }
    if oracle:
        try:
            ref = ve_marginal(ground_model(model, evidence, cap), query, cap)
            row["maxRelError"] = f"{max_rel_error(ref, res.distribution):.3e}"
        except SizeError:
            row["maxRelError"] = "skipped:size-cap"
    return row


def write_rows(rows, path=None):
    rows = list(rows)
    cols = list(COLUMNS)
    if any("maxRelError" in r for r in rows):
        cols.append("maxRelError")
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    finally:
        if path:
            out.close()


def plot_data(family, sizes, fracs=(0.2,), seeds=(0,), m=2, log_space=True):
    """Per-(N, evidence fraction) runtime series, one dict per point.

    Runtimes are aggregated over seeds; log10 of the mean is included so the
    series can go straight onto a log-scale axis.
    """
    out = []
    for frac in fracs:
        for n in sizes:
            times, ops = [], set()
            for s in seeds:
                row = run_bench(BenchmarkSpec(family, n, m=m, evidence_frac=frac, seed=s), log_space=log_space)
                times.append(row["runtimeMs"])
                ops.add(row["opCount"])
            mean = statistics.fmean(times)
            out.append(
                {
                    "family": family,
                    "N": n,
                    "evidenceFrac": frac,
                    "runs": len(times),
                    "meanRuntimeMs": round(mean, 3),
                    "minRuntimeMs": min(times),
                    "maxRuntimeMs": max(times),
                    "log10RuntimeMs": round(math.log10(max(mean, 1e-9)), 4),
                    "opCount": "/".join(map(str, sorted(ops))),
                }
            )
    return out


PLOT_COLUMNS = [
    "family",
    "N",
    "evidenceFrac",
    "runs",
    "meanRuntimeMs",
    "minRuntimeMs",
    "maxRuntimeMs",
    "log10RuntimeMs",
    "opCount",
]
