"""The lifted operators as pure rewrites of parfactors.

Each operator checks its preconditions, raises ``PreconditionError`` naming
the enabling operator when they fail, and returns an ``OperatorResult``
listing what it consumed and produced. Parfactors must be linear (see
``core.linearize``); renaming apart happens inside the operators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import numeric
from .constraint import ConstraintTree, sort_constants
from .core import (
    Atom,
    CountingFormula,
    Parfactor,
    Potential,
    fresh_name,
    histogram_index,
    histogram_matrix,
    histogram_range,
    log_multiplicities,
)
from .errors import PreconditionError, StructuralError

KINDS = (
    "MULTIPLY",
    "SUM-OUT",
    "COUNT-CONVERT",
    "SPLIT",
    "EXPAND",
    "COUNT-NORMALIZE",
    "ABSORB",
    "GROUND-LOGVAR",
)


@dataclass
class OperatorResult:
    kind: str
    removed: tuple
    added: tuple
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def cost_rows(self):
        return sum(g.size for g in self.added)

    def render(self, step, consumed, produced):
        ins = ",".join(map(str, consumed))
        outs = ",".join(map(str, produced))
        line = f"{step:4d} {self.kind:<15} [{ins}] -> [{outs}] rows={self.cost_rows}"
        return line + (f"  {self.note}" if self.note else "")


@dataclass(frozen=True)
class EvidenceParfactor:
    """phi_E(P(@0..@k)) | C_E with phi_E(o) = 1 and 0 elsewhere."""

    pred: object
    constraint: ConstraintTree
    value: str

    def as_parfactor(self, log=False):
        vars_ = self.constraint.logvars
        table = np.array([1.0 if v == self.value else 0.0 for v in self.pred.range])
        pot = Potential([self.pred.range], numeric.to_log(table) if log else table, log)
        return Parfactor([Atom(self.pred, vars_)], self.constraint, pot)


def positions(k):
    return tuple(f"@{i}" for i in range(k))


def rv_relation(arg, constraint):
    """The randvars an argument covers, as a relation over argument positions."""
    atom = arg.atom
    return constraint.project(atom.args).rename(dict(zip(atom.args, positions(len(atom.args)))))


def arg_relation(g, i):
    key = ("rel", i)
    if key not in g.cache:
        g.cache[key] = rv_relation(g.args[i], g.constraint)
    return g.cache[key]


def overlaps(r1, r2):
    return not r1.isdisjoint(r2)


def proper(r1, r2):
    return r1 == r2 or r1.isdisjoint(r2)


# table helpers


def _tables(gs):
    log = any(g.potential.log for g in gs)
    return log, [g.potential.as_log().table if log else g.potential.table for g in gs]


def _arrange(t, labels, out):
    """Lay out axes labelled ``labels`` along ``out``: diagonals for repeats, 1 for missing."""
    if len(set(labels)) != len(labels):
        uniq = list(dict.fromkeys(labels))
        ids = {lab: k for k, lab in enumerate(uniq)}
        t = np.einsum(t, [ids[lab] for lab in labels], [ids[lab] for lab in uniq])
        labels = uniq
    order = sorted(range(len(labels)), key=lambda k: out.index(labels[k]))
    t = np.transpose(t, order) if labels else t
    shape = [1] * len(out)
    for k in order:
        shape[out.index(labels[k])] = t.shape[order.index(k)]
    return np.reshape(t, shape)


def _make(args, constraint, table, log):
    g = Parfactor(args, constraint, None, check=False)
    pot = Potential(g.ranges, table, log)
    return Parfactor(args, constraint, pot)


def _independent(C, L, base, counted):
    """Does the set of ``counted`` values, given L, depend only on ``base``?"""
    full = C.project(tuple(L) + (counted,))
    return full.same_relation(C.project(tuple(L)).join(C.project(tuple(base) + (counted,))))


def _count(C, Y, Z):
    if not Y:
        return 1 if not C.is_empty() else 0
    return C.count_normalized(tuple(Y), tuple(Z))


# MULTIPLY


def multiply(g1, g2, theta=None):
    """Product of two parfactors under alignment ``theta`` (g1 logvar -> g2 logvar)."""
    theta = dict(theta or {})
    if len(set(theta.values())) != len(theta):
        raise PreconditionError("alignment is not one-to-one")
    for v, w in theta.items():
        if v not in g1.constraint.logvars or w not in g2.constraint.logvars:
            raise PreconditionError(f"alignment {v}->{w} names an unknown logvar")
    used = set(g2.constraint.logvars) | set(g1.constraint.logvars)
    ren = {}
    for v in g1.constraint.logvars:
        if v in theta:
            ren[v] = theta[v]
        elif v in g2.constraint.logvars:
            ren[v] = fresh_name(v, used)
            used.add(ren[v])
    h1 = g1.rename(ren)
    X = tuple(theta[v] for v in g1.constraint.logvars if v in theta)
    if not h1.constraint.project(X).same_relation(g2.constraint.project(X)):
        raise PreconditionError("invalid alignment: aligned projections differ")
    counted = [x for x in X if x in g2.counted or x in h1.counted]
    Xn = tuple(x for x in X if x not in counted)
    for x in counted:
        a1 = [a for a in h1.args if a.is_count and a.counted == x]
        a2 = [a for a in g2.args if a.is_count and a.counted == x]
        if not a1 or not a2 or a1[0] != a2[0]:
            raise PreconditionError("a counted logvar may only align with an identical counting formula")
        for h in (h1, g2):
            if not _independent(h.constraint, h.logvars, Xn, x):
                raise PreconditionError("aligned counting formula depends on unaligned logvars")
    L1, L2 = h1.logvars, g2.logvars
    Y1 = [v for v in L1 if v not in Xn]
    Y2 = [v for v in L2 if v not in Xn]
    r1 = _count(h1.constraint.project(L1), Y1, Xn)
    r2 = _count(g2.constraint.project(L2), Y2, Xn)
    if r1 is None or r2 is None:
        if r1 is None:
            back = {w: v for v, w in ren.items()}
            detail = (0, [back.get(v, v) for v in Y1], [back.get(v, v) for v in Xn])
        else:
            detail = (1, Y2, list(Xn))
        raise PreconditionError("unaligned logvars are not count-normalized", enabler="COUNT-NORMALIZE", detail=detail)
    C = h1.constraint.join(g2.constraint)
    out = list(h1.args)
    for a in g2.args:
        if a not in out:
            out.append(a)
    if g1.potential is None or g2.potential is None:
        return OperatorResult("MULTIPLY", (g1, g2), (Parfactor(out, C, None, check=False),))
    log, (t1, t2) = _tables([g1, g2])
    t1 = numeric.power(t1, 1.0 / r2, log) if r2 != 1 else t1
    t2 = numeric.power(t2, 1.0 / r1, log) if r1 != 1 else t2
    res = numeric.multiply(_arrange(t1, list(h1.args), out), _arrange(t2, list(g2.args), out), log)
    res = np.broadcast_to(res, tuple(len(r) for r in Parfactor(out, C, None, check=False).ranges)).copy()
    return OperatorResult("MULTIPLY", (g1, g2), (_make(out, C, res, log),), extra={"r1": r1, "r2": r2})


def _logvar_maps(g1, g2, pairs):
    theta = {}
    for i, j in pairs:
        a, b = g1.args[i], g2.args[j]
        for v, w in zip(a.atom.args, b.atom.args):
            if a.is_count and (v == a.counted) != (w == b.counted):
                return None
            if theta.get(v, w) != w:
                return None
            theta[v] = w
    if len(set(theta.values())) != len(theta):
        return None
    return theta


def _valid_alignment(g1, g2, theta):
    if not theta:
        return True
    X1 = tuple(theta)
    X2 = tuple(theta[v] for v in X1)
    return g1.constraint.project(X1).rename(theta).same_relation(g2.constraint.project(X2))


def find_alignments(g1, g2, required=()):
    """Valid alignments containing the ``required`` (i, j) argument pairs.

    The first one is grown greedily from the required pairs: arguments of g1
    are visited in order and matched with the first argument of g2 that keeps
    the alignment one-to-one and valid, so no further pair can be added. The
    bare required alignment follows if it differs.
    """
    pairs = list(required)
    theta = _logvar_maps(g1, g2, pairs)
    if theta is None or not _valid_alignment(g1, g2, theta):
        return []
    base = dict(theta)
    used_i = {i for i, _ in pairs}
    used_j = {j for _, j in pairs}
    for i, a in enumerate(g1.args):
        if i in used_i:
            continue
        for j, b in enumerate(g2.args):
            if j in used_j or a.pred != b.pred or a.is_count != b.is_count:
                continue
            t = _logvar_maps(g1, g2, pairs + [(i, j)])
            if t is None:
                continue
            if t != theta and not _valid_alignment(g1, g2, t):
                continue
            pairs.append((i, j))
            used_i.add(i)
            used_j.add(j)
            theta = t
            break
    out = [theta]
    if base != theta:
        out.append(base)
    return out


# SUM-OUT


def _other_logvars(g, i):
    out = set()
    for j, a in enumerate(g.args):
        if j != i:
            out.update(a.logvars)
    return out


def sum_out(g, i, others=()):
    """Sum the randvars of argument ``i`` out of g. ``others`` are the rest of the model."""
    A = g.args[i]
    C = g.constraint
    L = g.logvars
    rel = arg_relation(g, i)
    for j, b in enumerate(g.args):
        if j != i and b.pred == A.pred and overlaps(rel, arg_relation(g, j)):
            raise PreconditionError(f"{A} overlaps {b} in the same parfactor", enabler="MULTIPLY")
    for h in others:
        for j, b in enumerate(h.args):
            if b.pred == A.pred and overlaps(rel, arg_relation(h, j)):
                raise PreconditionError(f"{A} also occurs in another parfactor", enabler="MULTIPLY")
    CL = C.project(L)
    mine = set(A.logvars)
    for v in L:
        if v not in mine and len(CL.values(v)) > 1:
            raise PreconditionError(f"logvar {v} is not in {A}", enabler="COUNT-CONVERT")
    rest = _other_logvars(g, i)
    Xexcl = [v for v in L if v in mine and v not in rest]
    Xcom = [v for v in L if v not in Xexcl]
    r = _count(CL, Xexcl, Xcom)
    if r is None:
        raise PreconditionError(
            f"{Xexcl} not count-normalized w.r.t. {Xcom}", enabler="COUNT-NORMALIZE", detail=(Xexcl, Xcom)
        )
    if Xexcl:
        for b in g.args:
            if b.is_count and b is not A and not _independent(C, L, Xcom, b.counted):
                raise PreconditionError(f"{b} depends on logvars being removed", enabler="GROUND-LOGVAR")
    keep = [v for v in C.logvars if v not in Xexcl and v != getattr(A, "counted", None)]
    C2 = C.project(keep)
    args = g.args[:i] + g.args[i + 1 :]
    if g.potential is None:
        return OperatorResult("SUM-OUT", (g,), (Parfactor(args, C2, None, check=False),), extra={"r": r})
    log = g.potential.log
    t = g.potential.table
    if A.is_count:
        lw = log_multiplicities(len(A.pred.range), g.count_of(A))
    else:
        lw = np.zeros(len(A.pred.range))
    s = numeric.weighted_sum(t, i, lw, log)
    if r != 1:
        s = numeric.power(s, r, log)
    return OperatorResult("SUM-OUT", (g,), (_make(args, C2, s, log),), extra={"r": r})


# COUNT-CONVERT


def count_convert(g, X):
    C = g.constraint
    L = g.logvars
    if X not in L:
        raise StructuralError(f"{X} is not a free logvar of the parfactor")
    holders = [j for j, a in enumerate(g.args) if X in a.logvars]
    if len(holders) != 1:
        raise PreconditionError(f"{X} occurs in {len(holders)} arguments", enabler="GROUND-LOGVAR")
    j = holders[0]
    A = g.args[j]
    if A.is_count:
        raise PreconditionError(f"{X} occurs inside a counting formula", enabler="GROUND-LOGVAR")
    rest = tuple(v for v in L if v != X)
    CL = C.project(L)
    n = CL.count_normalized((X,), rest)
    if n is None:
        raise PreconditionError(f"{X} is not count-normalized", enabler="COUNT-NORMALIZE", detail=((X,), rest))
    for xc in g.counted:
        if not _independent(C, L, rest, xc):
            raise PreconditionError(f"counted {xc} depends on {X}", enabler="GROUND-LOGVAR")
    args = list(g.args)
    args[j] = CountingFormula(A, X)
    probe = Parfactor(args, C, None, check=False)
    twin = next((k for k in range(len(args)) if k != j and _same_randvars(probe, k, j)), None)
    if twin is not None:
        # the new formula duplicates argument ``twin``: fold straight onto it
        del args[j]
        still = {v for a in args for v in a.atom.args}
        C2 = C.project([v for v in C.logvars if v in still])
        if g.potential is None:
            return OperatorResult("COUNT-CONVERT", (g,), (Parfactor(args, C2, None, check=False),), note="fused")
        B = g.args[twin]
        H = histogram_matrix(len(A.pred.range), g.count_of(B))
        t = numeric.histogram_power_onto(g.potential.table, j, twin, H, g.potential.log)
        return OperatorResult("COUNT-CONVERT", (g,), (_make(args, C2, t, g.potential.log),), note="fused")
    if g.potential is None:
        return OperatorResult("COUNT-CONVERT", (g,), (Parfactor(args, C, None, check=False),))
    log = g.potential.log
    H = histogram_matrix(len(A.pred.range), n)
    t = numeric.histogram_power(g.potential.table, j, H, log)
    return OperatorResult("COUNT-CONVERT", (g,), (_make(args, C, t, log),))


# SPLIT and EXPAND


def _other_relation(other, other_constraint):
    if isinstance(other, ConstraintTree):
        return other
    return rv_relation(other, other_constraint)


def split(g, i, other, other_constraint=None):
    """Partition g by whether argument i's randvars fall in the other P(C)RV."""
    A = g.args[i]
    if A.is_count:
        raise StructuralError("split applies to atoms; use expand for counting formulas")
    R = _other_relation(other, other_constraint)
    com, excl = g.constraint.split_on_overlap(R, A.args, positions(len(A.args)))
    cells = [c for c in (com, excl) if not c.is_empty()]
    added = tuple(g.with_(constraint=c, check=False) for c in cells)
    if len(added) == 1:
        added = (g,)
    return OperatorResult("SPLIT", (g,), added)


def expand(g, i, other, other_constraint=None):
    """Split counting formula i into common and exclusive parts w.r.t. the other P(C)RV."""
    A = g.args[i]
    if not A.is_count:
        raise StructuralError("expand applies to counting formulas")
    R = _other_relation(other, other_constraint)
    X = A.counted
    L = g.logvars
    C = g.constraint
    Cp = C.project(L + (X,))
    com, excl = Cp.split_on_overlap(R, A.atom.args, positions(len(A.atom.args)))
    if com.is_empty() or excl.is_empty():
        return OperatorResult("EXPAND", (g,), (g,))
    groups = Cp.group_by_joint_count(X, com, excl)
    used = set(C.logvars)
    out = []
    for (kc, ke), cell in groups:
        cl = cell.project(L)
        full = C.join(cl) if L else C
        if kc == 0 or ke == 0:
            out.append(g.with_(constraint=full, check=False))
            continue
        xc = fresh_name(X, used)
        used.add(xc)
        xe = fresh_name(X, used)
        used.add(xe)
        ci_com = com.join(cl) if L else com
        ci_exc = excl.join(cl) if L else excl
        Ci = full.drop([X]).join(ci_com.rename({X: xc})).join(ci_exc.rename({X: xe}))
        args = list(g.args)
        args[i : i + 1] = [
            CountingFormula(A.atom.rename({X: xc}), xc),
            CountingFormula(A.atom.rename({X: xe}), xe),
        ]
        if g.potential is None:
            out.append(Parfactor(args, Ci, None, check=False))
            continue
        r = len(A.pred.range)
        idx = histogram_index(r, kc + ke)
        hc, he = histogram_range(r, kc), histogram_range(r, ke)
        take = np.array([[idx[tuple(a + b for a, b in zip(u, w))] for w in he] for u in hc])
        t = g.potential.table
        nt = np.take(t, take.ravel(), axis=i)
        shape = t.shape[:i] + (len(hc), len(he)) + t.shape[i + 1 :]
        out.append(_make(args, Ci, nt.reshape(shape), g.potential.log))
    return OperatorResult("EXPAND", (g,), tuple(out))


def shatter_pair(g1, g2):
    """Split/expand both parfactors until every same-predicate argument pair is proper."""
    left, right = [g1], [g2]
    changed = True
    while changed:
        changed = False
        for side, other in ((left, right), (right, left)):
            for k, g in enumerate(list(side)):
                res = _fix_against(g, other)
                if res is not None:
                    side[k : k + 1] = list(res.added)
                    changed = True
                    break
            if changed:
                break
    return left, right


def _fix_against(g, others):
    for i, a in enumerate(g.args):
        ra = arg_relation(g, i)
        for h in others:
            for j, b in enumerate(h.args):
                if a.pred != b.pred:
                    continue
                rb = arg_relation(h, j)
                if proper(ra, rb):
                    continue
                res = expand(g, i, rb) if a.is_count else split(g, i, rb)
                if len(res.added) > 1:
                    return res
    return None


# COUNT-NORMALIZE


def count_normalize(g, Y, Z):
    L = g.logvars
    Y, Z = tuple(Y), tuple(Z)
    if not set(Y) <= set(L) or not set(Z) <= set(L) - set(Y):
        raise StructuralError("count-normalize needs Y within the logvars and Z disjoint from Y")
    CL = g.constraint.project(L)
    cells = CL.group_by_count(Y, Z)
    if len(cells) <= 1:
        return OperatorResult("COUNT-NORMALIZE", (g,), (g,))
    added = tuple(g.with_(constraint=g.constraint.join(cell), check=False) for _, cell in cells)
    return OperatorResult("COUNT-NORMALIZE", (g,), added)


# ABSORB


def absorb_plan(g, i):
    """(X^excl, X^nce, L') for absorbing argument i."""
    A = g.args[i]
    rest = _other_logvars(g, i)
    Xexcl = [v for v in A.atom.args if v not in rest]
    Xnce = [v for v in Xexcl if not (A.is_count and v == A.counted)]
    Lp = [v for v in g.logvars if v not in Xexcl]
    return Xexcl, Xnce, Lp


def absorb(g, i, ge):
    A = g.args[i]
    if A.pred != ge.pred:
        raise StructuralError("evidence is about a different predicate")
    if not arg_relation(g, i).issubset(ge.constraint):
        raise PreconditionError(f"evidence covers only part of {A}", enabler="SPLIT")
    C = g.constraint
    Xexcl, Xnce, Lp = absorb_plan(g, i)
    CL = C.project(g.logvars)
    r = _count(CL, Xnce, Lp)
    if r is None:
        raise PreconditionError(
            f"{Xnce} not count-normalized w.r.t. {Lp}", enabler="COUNT-NORMALIZE", detail=(Xnce, Lp)
        )
    if Xnce:
        for b in g.args:
            if b.is_count and b is not A and not _independent(C, g.logvars, Lp, b.counted):
                raise PreconditionError(f"{b} depends on absorbed logvars", enabler="GROUND-LOGVAR")
    C2 = C.project([v for v in C.logvars if v not in Xexcl])
    args = g.args[:i] + g.args[i + 1 :]
    if g.potential is None:
        return OperatorResult("ABSORB", (g,), (Parfactor(args, C2, None, check=False),), extra={"r": r})
    o = A.pred.range.index(ge.value)
    if A.is_count:
        k = len(A.pred.range)
        n = g.count_of(A)
        h = tuple(n if v == o else 0 for v in range(k))
        e = histogram_index(k, n)[h]
    else:
        e = o
    log = g.potential.log
    t = np.take(g.potential.table, e, axis=i)
    if r != 1:
        t = numeric.power(t, r, log)
    return OperatorResult("ABSORB", (g,), (_make(args, C2, t, log),), extra={"r": r})


# GROUND-LOGVAR


def ground_logvar(g, X):
    if X not in g.logvars:
        raise StructuralError(f"{X} is not a free logvar of the parfactor")
    C = g.constraint
    added = tuple(g.with_(constraint=C.select_eq(X, x), check=False) for x in sort_constants(C.values(X)))
    return OperatorResult("GROUND-LOGVAR", (g,), added)


# internal simplifications (randvar-preserving rewrites)


def _diagonal(C, pairs):
    """True if every tuple of C has equal values on each (u, v) pair."""
    for u, v in pairs:
        if u == v:
            continue
        for b in C.project((u, v)).boxes():
            if len(b[0]) != 1 or b[0] != b[1]:
                return False
    return True


def _merge_pair(g, i, j):
    """Argument j duplicates argument i on every grounding: keep i, take the diagonal."""
    a, b = g.args[i], g.args[j]
    args = list(g.args)
    del args[j]
    drop = [v for v in b.atom.args if v not in a.atom.args]
    still = set()
    for k, c in enumerate(args):
        still.update(c.atom.args)
    C = g.constraint.project([v for v in g.constraint.logvars if v not in drop or v in still])
    if g.potential is None:
        return Parfactor(args, C, None, check=False)
    labels = list(range(len(g.args)))
    labels[j] = i
    out = [k for k in range(len(g.args)) if k != j]
    t = np.einsum(g.potential.table, labels, out)
    return _make(args, C, t, g.potential.log)


def _same_randvars(g, i, j):
    """Do arguments i and j cover the same randvar(s) in every grounding?"""
    C = g.constraint
    a, b = g.args[i], g.args[j]
    if a.pred != b.pred or a.is_count != b.is_count:
        return False
    if not a.is_count:
        return _diagonal(C, list(zip(a.args, b.args)))
    ka, kb = a.atom.args.index(a.counted), b.atom.args.index(b.counted)
    if ka != kb:
        return False
    fixed = [(u, v) for u, v in zip(a.atom.args, b.atom.args) if u != a.counted]
    if not _diagonal(C, fixed):
        return False
    L = g.logvars
    pa = C.project(L + (a.counted,)).rename({a.counted: b.counted})
    pb = C.project(L + (b.counted,))
    return pa.same_relation(pb)


def find_duplicate(g):
    """A pair (i, j) of arguments that cover the same randvar(s) in every grounding."""
    for i, j in itertools.combinations(range(len(g.args)), 2):
        if _same_randvars(g, i, j):
            return i, j
    return None


def simplify(g, expand_self=True):
    """Apply one randvar-preserving clean-up to g, or return None.

    Merges arguments that always denote the same randvars, turns counting
    formulas over a single randvar into atoms, and expands a counting formula
    that partially overlaps another argument of a ground parfactor.
    """
    dup = find_duplicate(g)
    if dup is not None:
        return OperatorResult("SIMPLIFY", (g,), (_merge_pair(g, *dup),), note="merge duplicate arguments")
    for i, a in enumerate(g.args):
        if a.is_count and g.count_of(a) == 1:
            args = list(g.args)
            args[i] = a.atom
            ng = Parfactor(args, g.constraint, g.potential, check=False)
            if g.potential is not None:
                ng = _make(args, g.constraint, g.potential.table, g.potential.log)
            return OperatorResult("SIMPLIFY", (g,), (ng,), note="unit counting formula")
    if not expand_self:
        return None
    CL = g.constraint.project(g.logvars)
    if all(len(CL.values(v)) == 1 for v in g.logvars):
        for i, a in enumerate(g.args):
            if not a.is_count:
                continue
            ra = arg_relation(g, i)
            for j, b in enumerate(g.args):
                if j != i and b.pred == a.pred:
                    rb = arg_relation(g, j)
                    if not proper(ra, rb):
                        res = expand(g, i, rb)
                        if len(res.added) > 1 or res.added[0] is not g:
                            res.note = "self-overlap"
                            return res
    return None
