"""Propositional reference semantics.

Grounds parfactors into ordinary factors and answers queries by classical
variable elimination or by enumerating the full joint. Everything here is
exponential on purpose; it is the yardstick for the lifted engine.
"""

from __future__ import annotations

import itertools
import math
import os
from collections import Counter

import numpy as np

from .core import linearize
from .constraint import const_key
from .errors import InputError, SizeError

DEFAULT_CAP = 24
CAP_ENV = "LIFTEDVE_GROUND_CAP"


def default_cap():
    raw = os.environ.get(CAP_ENV)
    if raw is None:
        return DEFAULT_CAP
    try:
        return float(raw)
    except ValueError:
        raise InputError(f"{CAP_ENV} must be a number, got {raw!r}") from None


def _rv_key(rv):
    return (rv[0], tuple(map(const_key, rv[1])))


class GroundFactor:
    __slots__ = ("randvars", "table")

    def __init__(self, randvars, table):
        self.randvars = tuple(randvars)
        self.table = np.asarray(table, dtype=float)

    def __repr__(self):
        names = ", ".join(f"{p}({','.join(c)})" for p, c in self.randvars)
        return f"GroundFactor({names})"


class GroundModel:
    def __init__(self, randvars, ranges, factors, evidence):
        self.randvars = tuple(randvars)
        self.ranges = dict(ranges)
        self.factors = list(factors)
        self.evidence = dict(evidence)

    def bits(self, rvs):
        return sum(math.log2(len(self.ranges[v])) for v in rvs)


def ground_parfactor(g):
    """gr(g) as a list of GroundFactor, one per tuple of the non-counted logvars."""
    g = linearize(g)
    L = g.logvars
    c = g.constraint
    lin = g.potential.linear() if g.potential is not None else None
    ranges = g.ranges
    out = []
    if c.is_empty():
        return out
    cl = c.reorder(L + g.counted) if g.counted else c.reorder(L)
    for l in sorted(cl.project(L).tuples(), key=lambda t: tuple(map(const_key, t))):
        env = dict(zip(L, l))
        sl = cl.select_tuple(L, l) if L else cl
        slots = []  # per arg: list of randvars
        for a in g.args:
            atom = a.atom
            if a.is_count:
                xs = sorted(sl.values(a.counted), key=const_key) if not sl.is_empty() else []
                rvs = []
                for x in xs:
                    e = dict(env)
                    e[a.counted] = x
                    rvs.append((atom.pred.name, tuple(e[v] for v in atom.args)))
                slots.append(rvs)
            else:
                slots.append([(atom.pred.name, tuple(env[v] for v in atom.args))])
        rv_list = []
        for s in slots:
            for rv in s:
                if rv not in rv_list:
                    rv_list.append(rv)
        pos = {rv: i for i, rv in enumerate(rv_list)}
        rng = {}
        for a, s in zip(g.args, slots):
            for rv in s:
                rng[rv] = a.pred.range
        shape = tuple(len(rng[rv]) for rv in rv_list)
        table = np.empty(shape)
        for assign in itertools.product(*(range(n) for n in shape)):
            idx = []
            for a, s, r in zip(g.args, slots, ranges):
                if a.is_count:
                    h = [0] * len(a.pred.range)
                    for rv in s:
                        h[assign[pos[rv]]] += 1
                    idx.append(r.index(tuple(h)))
                else:
                    idx.append(assign[pos[s[0]]])
            table[assign] = lin[tuple(idx)]
        out.append(GroundFactor(rv_list, table))
    return out


def ground_ranges(parfactors):
    out = {}
    for g in parfactors:
        g = linearize(g)
        for a in g.args:
            atom = a.atom
            for t in g.constraint.project(atom.args).tuples():
                out[(atom.pred.name, t)] = atom.pred.range
    return out


def ground_model(parfactors, evidence=None, cap=None):
    """Ground a model (or a list of parfactors) and attach evidence.

    ``evidence`` maps (pred name, constants) to an observed value. The cap
    bounds the width, in binary-equivalent randvars, of any single ground
    factor.
    """
    parfactors = getattr(parfactors, "parfactors", parfactors)
    cap = default_cap() if cap is None else cap
    evidence = dict(evidence or {})
    ranges = ground_ranges(parfactors)
    factors = []
    for g in parfactors:
        g = linearize(g)
        if any(a.is_count for a in g.args):
            width = sum(math.log2(len(a.pred.range)) * (g.count_of(a) if a.is_count else 1) for a in g.args)
            if width > cap:
                raise SizeError(f"a ground factor would span {width:.0f} binary randvars (cap {cap})")
        factors.extend(ground_parfactor(g))
    for rv, val in evidence.items():
        if rv in ranges and val not in ranges[rv]:
            raise InputError(f"value {val!r} not in the range of {rv[0]}")
    return GroundModel(sorted(ranges, key=_rv_key), ranges, factors, evidence)


def _condition(gm):
    """Apply evidence by slicing (plain conditioning); drops observed randvars."""
    out = []
    for f in gm.factors:
        t = f.table
        keep = []
        idx = []
        for rv in f.randvars:
            if rv in gm.evidence and rv in gm.ranges:
                idx.append(gm.ranges[rv].index(gm.evidence[rv]))
            else:
                idx.append(slice(None))
                keep.append(rv)
        out.append((tuple(keep), t[tuple(idx)]))
    return out


def _einsum(factors, keep):
    # einsum only accepts 52 distinct subscripts, so number them locally
    local = {}
    ops = []
    for vs, t in factors:
        ops.append(t)
        ops.append([local.setdefault(v, len(local)) for v in vs])
    ops.append([local.setdefault(v, len(local)) for v in keep])
    return np.einsum(*ops)


def _contract(factors, keep):
    """Product of the factors summed down to ``keep``, folded pairwise."""
    factors = list(factors)
    if len(factors) <= 1:
        return _einsum(factors, keep)
    acc = factors[0]
    for k in range(1, len(factors)):
        later = set(keep)
        for vs, _ in factors[k + 1 :]:
            later.update(vs)
        nxt = factors[k]
        vs = []
        for v in list(acc[0]) + list(nxt[0]):
            if v in later and v not in vs:
                vs.append(v)
        acc = (tuple(vs), _einsum([acc, nxt], vs))
    return _einsum([acc], keep)


def elimination_order(factors, targets, ranges):
    """Min-degree order over the interaction graph; returns (order, max width in bits)."""
    adj = {}
    for vs, _ in factors:
        for v in vs:
            adj.setdefault(v, set()).update(u for u in vs if u != v)
    order = []
    width = max((sum(math.log2(len(ranges[v])) for v in vs) for vs, _ in factors), default=0.0)
    live = set(adj) - set(targets)
    while live:
        v = min(live, key=lambda u: (len(adj[u]), _rv_key(u)))
        nb = adj[v]
        width = max(width, sum(math.log2(len(ranges[u])) for u in nb | {v}))
        for u in nb:
            adj[u] |= nb - {u}
            adj[u].discard(v)
        del adj[v]
        live.discard(v)
        order.append(v)
    return order, width


def ve_marginal(gm, query, cap=None):
    """P(query | evidence) by variable elimination; a dict value -> probability."""
    cap = default_cap() if cap is None else cap
    if query not in gm.ranges:
        raise InputError(f"query {query} is not a randvar of the model")
    rng = gm.ranges[query]
    if query in gm.evidence:
        return {v: float(v == gm.evidence[query]) for v in rng}
    factors = _condition(gm)
    order, width = elimination_order(factors, [query], gm.ranges)
    if width > cap:
        raise SizeError(f"elimination needs a table over {width:.0f} binary randvars (cap {cap})")
    pool = list(factors)
    for v in order:
        touching = [f for f in pool if v in f[0]]
        if not touching:
            continue
        pool = [f for f in pool if v not in f[0]]
        keep = []
        for vs, _ in touching:
            keep.extend(u for u in vs if u != v and u not in keep)
        t = _contract(touching, keep)
        m = t.max()
        if m > 0:
            t = t / m
        pool.append((tuple(keep), t))
    res = np.ones(len(rng))
    for vs, t in pool:
        if not vs:
            continue
        res = res * _contract([(vs, t)], [query])
    return _normalize(rng, res)


def _normalize(rng, res):
    z = res.sum()
    if not np.isfinite(z) or z <= 0:
        raise InputError("the evidence has probability zero under the model")
    return {v: float(p / z) for v, p in zip(rng, res)}


def joint_enumerate(gm, cap=None):
    """Unnormalized joint over all unobserved randvars: (randvars, table)."""
    cap = default_cap() if cap is None else cap
    rvs = [v for v in gm.randvars if v not in gm.evidence]
    bits = gm.bits(rvs)
    if bits > cap:
        raise SizeError(f"joint over {bits:.0f} binary randvars exceeds the cap {cap}")
    factors = _condition(gm)
    ids = {v: i for i, v in enumerate(rvs)}
    shape = [len(gm.ranges[v]) for v in rvs]
    t = np.ones(shape)
    for vs, f in factors:
        t = t * _broadcast(vs, f, ids, shape)
    return tuple(rvs), t


def _broadcast(vs, f, ids, shape):
    axes = [ids[v] for v in vs]
    if len(axes) > 1:
        f = np.transpose(f, np.argsort(axes))
    full = [1] * len(shape)
    for a in axes:
        full[a] = shape[a]
    return np.reshape(f, full)


def joint_marginal(gm, query, cap=None):
    if query not in gm.ranges:
        raise InputError(f"query {query} is not a randvar of the model")
    rng = gm.ranges[query]
    if query in gm.evidence:
        return {v: float(v == gm.evidence[query]) for v in rng}
    rvs, t = joint_enumerate(gm, cap)
    i = rvs.index(query)
    res = t.sum(axis=tuple(j for j in range(len(rvs)) if j != i))
    return _normalize(rng, res)


def ground_joint(parfactors, randvars, ranges, log=False):
    """Unnormalized joint of the ground factors of ``parfactors`` over ``randvars``.

    Randvars the parfactors do not mention are constant along their axis.
    With ``log`` the result is a log table, which keeps large exponents exact.
    """
    ids = {v: i for i, v in enumerate(randvars)}
    shape = [len(ranges[v]) for v in randvars]
    total = np.zeros(shape) if log else np.ones(shape)
    for g in parfactors:
        for f in ground_parfactor(g):
            missing = [v for v in f.randvars if v not in ids]
            if missing:
                raise InputError(f"randvar {missing[0]} is outside the requested joint")
            t = _broadcast(f.randvars, f.table, ids, shape)
            if log:
                with np.errstate(divide="ignore"):
                    total = total + np.log(t)
            else:
                total = total * t
    return total


def factor_multiset(parfactors):
    """Ground factors as a Counter of (randvars, rounded table bytes) for exact comparisons."""
    out = Counter()
    for g in parfactors:
        for f in ground_parfactor(g):
            order = sorted(range(len(f.randvars)), key=lambda i: _rv_key(f.randvars[i]))
            t = np.transpose(f.table, order) if order else f.table
            key = tuple(f.randvars[i] for i in order)
            out[(key, tuple(np.round(t.ravel(), 12)))] += 1
    return out


def brute_marginal(parfactors, evidence, query, cap=None):
    """Convenience: ground and run VE in one call."""
    gm = ground_model(parfactors, evidence, cap)
    return ve_marginal(gm, query, cap)


__all__ = [
    "GroundFactor",
    "GroundModel",
    "brute_marginal",
    "elimination_order",
    "factor_multiset",
    "ground_joint",
    "ground_model",
    "ground_parfactor",
    "joint_enumerate",
    "joint_marginal",
    "ve_marginal",
]
