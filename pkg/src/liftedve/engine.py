"""Lifted variable elimination over constraint-tree parfactors.

The engine keeps a pool of parfactors keyed by integer ids. It folds the
evidence in first, isolates the query randvar, and then repeats: tidy and
shatter the pool, sum out a PRV if one is directly eliminable, otherwise run
the cheapest elimination plan, and ground a logvar only when no plan exists.

An elimination plan for a PRV class V (all arguments denoting the same
randvars) count-converts the logvars that stand in the way, multiplies every
parfactor mentioning V into one, and sums V out. Plans are compared on
skeleton parfactors (constraints and arguments, no tables) by the pair
(histogram axes created, operators applied, rows created).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import numeric
from .constraint import ConstraintTree
from .core import linearize
from .errors import InputError, PreconditionError
from .operators import (
    KINDS,
    EvidenceParfactor,
    absorb,
    absorb_plan,
    arg_relation,
    count_convert,
    count_normalize,
    expand,
    find_alignments,
    multiply,
    positions,
    proper,
    simplify,
    split,
    sum_out,
    ground_logvar,
)

MAX_STEPS = 100000


@dataclass
class MarginalResult:
    query: tuple
    distribution: dict
    op_count: int = 0
    rows_created: int = 0
    wall_time: float = 0.0
    log_space: bool = False
    trace: list = field(default_factory=list)
    kinds: list = field(default_factory=list)

    def __str__(self):
        name, consts = self.query
        head = f"P({name}({','.join(consts)}) | e)" if consts else f"P({name} | e)"
        body = ", ".join(f"{v}: {p:.10g}" for v, p in self.distribution.items())
        return f"{head} = {{{body}}}"


def _changed(res):
    return not (len(res.added) == 1 and len(res.removed) == 1 and res.added[0] is res.removed[0])


def _fmt_rv(rv):
    name, consts = rv
    return f"{name}({','.join(consts)})" if consts else name


def evidence_parfactors(model, evidence):
    """Group observations by (predicate, value) into evidence parfactors.

    ``evidence`` is a dict or an iterable of ((pred, consts), value) pairs.
    """
    items = evidence.items() if isinstance(evidence, dict) else list(evidence or ())
    seen = {}
    for (name, consts), value in items:
        consts = tuple(consts)
        pred = model.predicate(name)
        if len(consts) != pred.arity:
            raise InputError(f"{name} takes {pred.arity} arguments, got {len(consts)}")
        for c, d in zip(consts, pred.domains):
            if c not in d.constants:
                raise InputError(f"{c!r} is not in domain {d.name}")
        if value not in pred.range:
            raise InputError(f"{value!r} is not in the range of {name}")
        key = (name, consts)
        if key in seen and seen[key] != value:
            raise InputError(f"conflicting evidence for {_fmt_rv(key)}: {seen[key]!r} and {value!r}")
        seen[key] = value
    groups = {}
    for (name, consts), value in seen.items():
        groups.setdefault((name, value), []).append(consts)
    out = []
    for (name, value) in sorted(groups, key=lambda k: (k[0], model.predicate(k[0]).range.index(k[1]))):
        pred = model.predicate(name)
        C = ConstraintTree.from_tuples(positions(pred.arity), groups[(name, value)])
        out.append(EvidenceParfactor(pred, C, value))
    return out, seen


class _Real:
    """Plan context that acts on the engine's pool."""

    def __init__(self, engine):
        self.e = engine

    def get(self, pid):
        return self.e.pf[pid]

    def apply(self, res, consumed):
        return self.e.apply(res, consumed)


class _Sim:
    """Plan context over skeletons; only tallies what would be created."""

    def __init__(self, engine):
        self.e = engine
        self.tmp = {}
        self.next = -1
        self.rows = 0
        self.degree = 0
        self.steps = 0

    def get(self, pid):
        if pid in self.tmp:
            return self.tmp[pid]
        return self.e.pf[pid].skeleton()

    def apply(self, res, consumed):
        if not _changed(res):
            return list(consumed)
        self.steps += 1
        ids = []
        for g in res.added:
            if g.constraint.is_empty():
                continue
            self.rows += g.size
            self.degree = max(self.degree, sum(1 for a in g.args if a.is_count))
            self.tmp[self.next] = g
            ids.append(self.next)
            self.next -= 1
        return ids


class Engine:
    def __init__(self, model, evidence=None, log_space=False, trace=False):
        self.model = model
        self.evidence = evidence or {}
        self.log = log_space
        self.keep_trace = trace
        self.pf = {}
        self.next_id = 1
        self.ops = 0
        self.rows = 0
        self.kinds = []
        self.trace = []
        self.zero = False
        self._clean = set()
        self._proper = set()
        self._plans = {}

    # pool bookkeeping

    def _add(self, g):
        if g.constraint.is_empty():
            return None
        if not g.args:
            v = float(np.asarray(g.potential.table).reshape(()))
            if (self.log and np.isneginf(v)) or (not self.log and v == 0.0):
                self.zero = True
            return None
        pid = self.next_id
        self.next_id += 1
        self.pf[pid] = g
        return pid

    def apply(self, res, consumed):
        consumed = list(consumed)
        if not _changed(res):
            return consumed
        for pid in consumed:
            del self.pf[pid]
        produced = [p for p in (self._add(g) for g in res.added) if p is not None]
        rows = res.cost_rows
        self.rows += rows
        if res.kind in KINDS:
            self.ops += 1
        self.kinds.append(res.kind)
        if self.keep_trace:
            self.trace.append(res.render(len(self.kinds), consumed, produced))
        return produced

    # evidence

    def _incorporate(self, ge):
        while True:
            if not self._evidence_step(ge):
                break
        # whatever the operators could not absorb stays as an indicator
        residual = None
        for pid in sorted(self.pf):
            g = self.pf[pid]
            for i, a in enumerate(g.args):
                if a.pred != ge.pred:
                    continue
                part = arg_relation(g, i).intersect(ge.constraint)
                if part.is_empty():
                    continue
                residual = part if residual is None else residual.union(part)
        if residual is not None:
            self._add(EvidenceParfactor(ge.pred, residual, ge.value).as_parfactor(self.log))

    def _evidence_step(self, ge):
        for pid in sorted(self.pf):
            g = self.pf[pid]
            for i, a in enumerate(g.args):
                if a.pred != ge.pred:
                    continue
                rel = arg_relation(g, i)
                if rel.isdisjoint(ge.constraint):
                    continue
                if rel.issubset(ge.constraint):
                    try:
                        self.apply(absorb(g, i, ge), [pid])
                        return True
                    except PreconditionError as e:
                        if e.enabler != "COUNT-NORMALIZE":
                            continue
                        _, Xnce, Lp = absorb_plan(g, i)
                        res = count_normalize(g, Xnce, Lp)
                        if _changed(res):
                            self.apply(res, [pid])
                            return True
                        continue
                res = expand(g, i, ge.constraint) if a.is_count else split(g, i, ge.constraint)
                if _changed(res):
                    self.apply(res, [pid])
                    return True
        return False

    # shattering and tidying

    def _isolate(self, qrel):
        changed = True
        while changed:
            changed = False
            for pid in sorted(self.pf):
                g = self.pf[pid]
                for i, a in enumerate(g.args):
                    if a.pred.name != self.query[0]:
                        continue
                    rel = arg_relation(g, i)
                    if proper(rel, qrel):
                        continue
                    res = expand(g, i, qrel) if a.is_count else split(g, i, qrel)
                    if _changed(res):
                        self.apply(res, [pid])
                        changed = True
                        break
                if changed:
                    break

    def _shatter_once(self):
        by_pred = {}
        for pid in sorted(self.pf):
            g = self.pf[pid]
            for i, a in enumerate(g.args):
                by_pred.setdefault(a.pred.name, []).append((pid, i))
        for name in sorted(by_pred):
            entries = by_pred[name]
            for x in range(len(entries)):
                p1, i1 = entries[x]
                for y in range(x + 1, len(entries)):
                    p2, i2 = entries[y]
                    if p1 == p2:
                        continue
                    key = (p1, i1, p2, i2)
                    if key in self._proper:
                        continue
                    g1, g2 = self.pf[p1], self.pf[p2]
                    r1, r2 = arg_relation(g1, i1), arg_relation(g2, i2)
                    if proper(r1, r2):
                        self._proper.add(key)
                        continue
                    for pid, g, i, other in ((p1, g1, i1, r2), (p2, g2, i2, r1)):
                        a = g.args[i]
                        res = expand(g, i, other) if a.is_count else split(g, i, other)
                        if _changed(res):
                            self.apply(res, [pid])
                            return True
        return False

    def normalize(self):
        changed = True
        while changed:
            changed = False
            for pid in sorted(self.pf):
                if pid in self._clean or pid not in self.pf:
                    continue
                res = simplify(self.pf[pid])
                if res is None:
                    self._clean.add(pid)
                else:
                    self.apply(res, [pid])
                    changed = True
            if self._shatter_once():
                changed = True

    # elimination

    def _classes(self):
        out = {}
        for pid in sorted(self.pf):
            g = self.pf[pid]
            for i, a in enumerate(g.args):
                out.setdefault((a.pred.name, arg_relation(g, i)), []).append((pid, i))
        return out

    def _done(self):
        return all(
            a.pred.name == self.query[0] and arg_relation(g, i) == self.qrel
            for g in self.pf.values()
            for i, a in enumerate(g.args)
        )

    def _direct_sum_out(self, classes):
        best = None
        for (name, rel), occ in classes.items():
            if len(occ) != 1 or (name == self.query[0] and rel == self.qrel):
                continue
            pid, i = occ[0]
            try:
                res = sum_out(self.pf[pid].skeleton(), i)
            except PreconditionError:
                continue
            key = (res.cost_rows, pid, i)
            if best is None or key < best:
                best = key
        if best is None:
            return False
        _, pid, i = best
        self.apply(sum_out(self.pf[pid], i), [pid])
        return True

    def _v_index(self, g, cls):
        name, rel = cls
        hits = [i for i, a in enumerate(g.args) if a.pred.name == name and arg_relation(g, i) == rel]
        return hits[0] if len(hits) == 1 else None

    def _tidy(self, ctx, pid):
        while True:
            res = simplify(ctx.get(pid), expand_self=False)
            if res is None:
                return pid
            pid = ctx.apply(res, [pid])[0]

    def _normalize_in_plan(self, ctx, pid, Y, Z):
        res = count_normalize(ctx.get(pid), Y, Z)
        if not _changed(res):
            return None
        ctx.apply(res, [pid])
        return "partial"

    def _run_plan(self, ctx, cls, occ, kind):
        """Eliminate class ``cls``; returns "done", "partial" (stopped after a
        count-normalize) or None when the plan does not apply."""
        pids = sorted({p for p, _ in occ})
        parts = []
        for pid in pids:
            g = ctx.get(pid)
            idxs = [i for p, i in occ if p == pid]
            if kind == "atom":
                if len(idxs) != 1 or g.args[idxs[0]].is_count:
                    return None
                keep = set(g.args[idxs[0]].logvars)
            else:
                keep = set()
            CL = g.constraint.project(g.logvars)
            need = [v for v in g.logvars if v not in keep and len(CL.values(v)) > 1]
            cur = pid
            for v in need:
                try:
                    res = count_convert(ctx.get(cur), v)
                except PreconditionError as e:
                    if e.enabler == "COUNT-NORMALIZE":
                        return self._normalize_in_plan(ctx, cur, *e.detail)
                    return None
                cur = ctx.apply(res, [cur])[0]
            cur = self._tidy(ctx, cur)
            g = ctx.get(cur)
            vi = self._v_index(g, cls)
            if vi is None or (kind == "count" and not g.args[vi].is_count):
                return None
            parts.append(cur)
        acc = parts[0]
        for p in parts[1:]:
            g1, g2 = ctx.get(acc), ctx.get(p)
            i1, i2 = self._v_index(g1, cls), self._v_index(g2, cls)
            aligns = find_alignments(g1, g2, required=[(i1, i2)])
            if not aligns:
                return None
            try:
                res = multiply(g1, g2, aligns[0])
            except PreconditionError as e:
                if e.enabler == "COUNT-NORMALIZE":
                    side, Y, Z = e.detail
                    return self._normalize_in_plan(ctx, (acc, p)[side], Y, Z)
                return None
            acc = ctx.apply(res, [acc, p])[0]
            acc = self._tidy(ctx, acc)
            if self._v_index(ctx.get(acc), cls) is None:
                return None
        g = ctx.get(acc)
        try:
            res = sum_out(g, self._v_index(g, cls))
        except PreconditionError as e:
            if e.enabler == "COUNT-NORMALIZE":
                return self._normalize_in_plan(ctx, acc, *e.detail)
            return None
        ctx.apply(res, [acc])
        return "done"

    def _plan_cost(self, cls, occ, kind):
        key = (kind, cls, tuple(occ))
        if key not in self._plans:
            sim = _Sim(self)
            status = self._run_plan(sim, cls, occ, kind)
            self._plans[key] = None if status is None else (sim.degree, sim.steps, sim.rows)
        return self._plans[key]

    def _best_plan(self, classes):
        best = None
        for cls, occ in classes.items():
            name, rel = cls
            if name == self.query[0] and rel == self.qrel:
                continue
            for k, kind in enumerate(("atom", "count")):
                if kind == "count" and rel.cardinality() == 1:
                    continue
                cost = self._plan_cost(cls, occ, kind)
                if cost is None:
                    continue
                key = (cost, occ[0], k)
                if best is None or key < best[0]:
                    best = (key, cls, occ, kind)
        if best is None:
            return False
        _, cls, occ, kind = best
        self._run_plan(_Real(self), cls, occ, kind)
        return True

    def _ground_step(self):
        best = None
        for pid in sorted(self.pf):
            g = self.pf[pid]
            CL = g.constraint.project(g.logvars)
            for v in g.logvars:
                k = len(CL.values(v))
                if k > 1:
                    key = (k * g.size, pid, v)
                    if best is None or key < best:
                        best = key
        if best is None:
            raise RuntimeError("no operator applies and nothing is left to ground")
        _, pid, v = best
        self.apply(ground_logvar(self.pf[pid], v), [pid])

    def _answer(self):
        pred = self.model.predicate(self.query[0])
        acc = np.zeros(len(pred.range)) if self.log else np.ones(len(pred.range))
        for pid in sorted(self.pf):
            g = self.pf[pid]
            t = g.potential.table
            # every argument is the query atom; take the diagonal
            if len(g.args) > 1:
                t = _diag(t)
            acc = numeric.multiply(acc, t, self.log)
        if self.zero:
            raise InputError("the evidence has probability zero under the model")
        p = numeric.normalize(acc, self.log)
        if p is None:
            raise InputError("the evidence has probability zero under the model")
        return {v: float(x) for v, x in zip(pred.range, p)}

    def prepare(self, query):
        """Load the model, fold in the evidence and isolate the query randvar.

        Returns the answer outright when the query is observed, else None.
        """
        name, consts = query
        consts = tuple(consts)
        pred = self.model.predicate(name)
        if len(consts) != pred.arity:
            raise InputError(f"{name} takes {pred.arity} arguments, got {len(consts)}")
        self.query = (name, consts)
        self.qrel = ConstraintTree.from_tuples(positions(pred.arity), [consts])
        evs, seen = evidence_parfactors(self.model, self.evidence)
        for g in self.model.parfactors:
            g = linearize(g)
            if g.potential is None:
                raise InputError("every parfactor needs a potential")
            self._add(g.with_(potential=g.potential.as_log()) if self.log else g)
        present = any(
            a.pred.name == name and not arg_relation(g, i).isdisjoint(self.qrel)
            for g in self.pf.values()
            for i, a in enumerate(g.args)
        )
        if not present:
            raise InputError(f"query {_fmt_rv(self.query)} is not a randvar of the model")
        if self.query in seen:
            return {v: float(v == seen[self.query]) for v in pred.range}
        for ge in evs:
            self._incorporate(ge)
        self._isolate(self.qrel)
        return None

    def step(self):
        """One round of the main loop; False once only the query is left."""
        self.normalize()
        if self._done():
            return False
        classes = self._classes()
        if not self._direct_sum_out(classes) and not self._best_plan(classes):
            self._ground_step()
        return True

    def run(self, query):
        t0 = time.perf_counter()
        dist = self.prepare(query)
        if dist is not None:
            return self._result(dist, t0)
        for _ in range(MAX_STEPS):
            if not self.step():
                break
        else:
            raise RuntimeError("elimination did not terminate")
        return self._result(self._answer(), t0)

    def _result(self, dist, t0):
        return MarginalResult(
            query=self.query,
            distribution=dist,
            op_count=self.ops,
            rows_created=self.rows,
            wall_time=time.perf_counter() - t0,
            log_space=self.log,
            trace=list(self.trace),
            kinds=list(self.kinds),
        )


def _diag(t):
    idx = np.arange(t.shape[0])
    return t[(idx,) * t.ndim]


def run_query(model, query, evidence=None, log_space=None, trace=False):
    """P(query | evidence). ``query`` is (pred name, constants).

    With ``log_space=None`` the engine works in linear space and falls back
    to log space if a table over- or underflows.
    """
    if log_space is None:
        try:
            return Engine(model, evidence, log_space=False, trace=trace).run(query)
        except numeric.Overflow:
            return Engine(model, evidence, log_space=True, trace=trace).run(query)
    return Engine(model, evidence, log_space=log_space, trace=trace).run(query)


def parse_query(text, model):
    from .core import parse_ground_atom

    return parse_ground_atom(text, model)


__all__ = ["Engine", "MarginalResult", "evidence_parfactors", "run_query", "parse_query"]
