"""Finite relations over logvars, stored as constraint trees.

A tree has one level per logvar. Every edge carries a non-empty set of
constants, sibling edges are disjoint, and a root-to-leaf path stands for the
Cartesian product of its edge labels. Trees are kept maximally merged: two
siblings never lead to equal subtrees, so a relation has exactly one tree per
level order. Children are sorted by their smallest constant.

Binary operations first reorder the operands so that the logvars they work
on form a common prefix, then walk both trees level by level.
"""

from __future__ import annotations

import itertools
import re
from functools import lru_cache

from .errors import PreconditionError, StructuralError

_DIGITS = re.compile(r"(\d+)")


@lru_cache(maxsize=None)
def const_key(c):
    """Natural sort key: ``x2`` sorts before ``x10``."""
    parts = _DIGITS.split(str(c))
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in parts if p)


@lru_cache(maxsize=1 << 16)
def _label_key(label):
    return min(map(const_key, label))


def sort_constants(cs):
    return sorted(cs, key=const_key)


class _Node:
    __slots__ = ("edges", "_hash", "_card", "_index")

    def __init__(self, edges):
        self.edges = edges
        self._hash = hash(edges)
        self._card = None
        self._index = None

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, _Node) or self._hash != other._hash:
            return False
        return self.edges == other.edges

    def card(self):
        if self._card is None:
            self._card = sum(len(lab) * ch.card() for lab, ch in self.edges) if self.edges else 1
        return self._card

    def index(self):
        # constant -> position of the edge holding it
        if self._index is None:
            idx = {}
            for j, (lab, _) in enumerate(self.edges):
                for c in lab:
                    idx[c] = j
            self._index = idx
        return self._index


# The leaf. A tree over zero logvars is TOP (one empty tuple) or None (empty).
TOP = _Node(())


def _make(edges):
    """Canonical node from disjoint (label, child) pairs; merges equal children."""
    merged = {}
    for lab, ch in edges:
        if ch is None or not lab:
            continue
        if ch in merged:
            merged[ch].append(lab)
        else:
            merged[ch] = [lab]
    if not merged:
        return None
    out = []
    for ch, labs in merged.items():
        lab = labs[0] if len(labs) == 1 else frozenset().union(*labs)
        out.append((lab, ch))
    out.sort(key=lambda e: _label_key(e[0]))
    return _Node(tuple(out))


def _build(boxes, depth, k):
    """Tree for the union of ``boxes`` (tuples of frozensets); boxes may overlap."""
    if not boxes:
        return None
    if depth == k:
        return TOP
    by_label = {}
    for b in boxes:
        by_label.setdefault(b[depth], []).append(b)
    labels = list(by_label)
    if len(labels) == 1 or sum(map(len, labels)) == len(frozenset().union(*labels)):
        parts = list(by_label.items())
    else:
        # split the labels into the cells of their Venn diagram
        sig = {}
        for i, lab in enumerate(labels):
            for c in lab:
                sig.setdefault(c, []).append(i)
        inv = {}
        for c, idxs in sig.items():
            inv.setdefault(tuple(idxs), []).append(c)
        parts = []
        for idxs, cs in inv.items():
            bs = [b for i in idxs for b in by_label[labels[i]]]
            parts.append((frozenset(cs), bs))
    return _make([(lab, _build(bs, depth + 1, k)) for lab, bs in parts])


def _paths(node, k):
    """Root-to-leaf paths as tuples of labels (disjoint boxes)."""
    if node is None:
        return []
    if k == 0:
        return [()]
    out = []
    stack = [(node, ())]
    while stack:
        n, pre = stack.pop()
        for lab, ch in n.edges:
            box = pre + (lab,)
            if ch is TOP:
                out.append(box)
            else:
                stack.append((ch, box))
    return out


def _prefix_paths(node, m):
    """Paths of length ``m`` paired with the subtree they lead to."""
    if node is None:
        return []
    out = []
    stack = [(node, (), 0)]
    while stack:
        n, pre, d = stack.pop()
        if d == m:
            out.append((pre, n))
            continue
        for lab, ch in n.edges:
            stack.append((ch, pre + (lab,), d + 1))
    return out


def _pairs(n1, n2):
    """Align the edges of two nodes: (label, child1, child2 or None)."""
    idx = n2.index()
    out = []
    for lab, ch in n1.edges:
        groups = {}
        for c in lab:
            groups.setdefault(idx.get(c, -1), []).append(c)
        if len(groups) == 1:
            j = next(iter(groups))
            out.append((lab, ch, n2.edges[j][1] if j >= 0 else None))
            continue
        for j, cs in groups.items():
            out.append((frozenset(cs), ch, n2.edges[j][1] if j >= 0 else None))
    return out


def _intersect(n1, n2, memo):
    if n1 is None or n2 is None:
        return None
    if n1 is TOP:
        return TOP
    key = (id(n1), id(n2))
    if key in memo:
        return memo[key]
    res = _make([(lab, _intersect(c1, c2, memo)) for lab, c1, c2 in _pairs(n1, n2) if c2 is not None])
    memo[key] = res
    return res


def _minus(n1, n2, memo):
    if n1 is None:
        return None
    if n2 is None:
        return n1
    if n1 is TOP:
        return None
    key = (id(n1), id(n2))
    if key in memo:
        return memo[key]
    res = _make([(lab, c1 if c2 is None else _minus(c1, c2, memo)) for lab, c1, c2 in _pairs(n1, n2)])
    memo[key] = res
    return res


def _semi(n1, n2, depth, m, memo):
    """Split n1 by whether its first ``m`` levels occur in n2: (common, exclusive)."""
    if depth == m:
        return n1, None
    key = (id(n1), id(n2), depth)
    if key in memo:
        return memo[key]
    com, exc = [], []
    for lab, c1, c2 in _pairs(n1, n2):
        if c2 is None:
            exc.append((lab, c1))
        else:
            a, b = _semi(c1, c2, depth + 1, m, memo)
            com.append((lab, a))
            exc.append((lab, b))
    res = (_make(com), _make(exc))
    memo[key] = res
    return res


def _graft(n, tail, memo):
    if n is TOP:
        return tail
    got = memo.get(id(n))
    if got is None:
        got = _make([(lab, _graft(ch, tail, memo)) for lab, ch in n.edges])
        memo[id(n)] = got
    return got


def _join(n1, n2, depth, m, memo):
    if n1 is None or n2 is None:
        return None
    if depth == m:
        return _graft(n1, n2, {})
    key = (id(n1), id(n2))
    if key in memo:
        return memo[key]
    res = _make([(lab, _join(c1, c2, depth + 1, m, memo)) for lab, c1, c2 in _pairs(n1, n2) if c2 is not None])
    memo[key] = res
    return res


def _cut(n, depth, m, memo):
    if n is None:
        return None
    if depth == m:
        return TOP
    got = memo.get(id(n))
    if got is None:
        got = _make([(lab, _cut(ch, depth + 1, m, memo)) for lab, ch in n.edges])
        memo[id(n)] = got
    return got


def _select(n, depth, target, values, memo):
    if n is None:
        return None
    got = memo.get(id(n))
    if got is not None or id(n) in memo:
        return got
    if depth == target:
        got = _make([(lab & values, ch) for lab, ch in n.edges])
    else:
        got = _make([(lab, _select(ch, depth + 1, target, values, memo)) for lab, ch in n.edges])
    memo[id(n)] = got
    return got


def _box_meet(a, b):
    out = []
    for x, y in zip(a, b):
        s = x & y
        if not s:
            return None
        out.append(s)
    return tuple(out)


class ConstraintTree:
    """A finite relation over an ordered tuple of distinct logvars."""

    __slots__ = ("logvars", "root")

    def __init__(self, logvars, root):
        self.logvars = tuple(logvars)
        self.root = root
        if len(set(self.logvars)) != len(self.logvars):
            raise StructuralError(f"repeated logvar in {self.logvars}")

    # construction

    @classmethod
    def from_boxes(cls, logvars, boxes):
        logvars = tuple(logvars)
        k = len(logvars)
        clean = []
        for b in boxes:
            b = tuple(frozenset(x) for x in b)
            if len(b) != k:
                raise StructuralError(f"box of width {len(b)} for logvars {logvars}")
            if all(b):
                clean.append(b)
        if k == 0:
            return cls(logvars, TOP if clean else None)
        return cls(logvars, _build(clean, 0, k))

    @classmethod
    def from_tuples(cls, logvars, tuples):
        logvars = tuple(logvars)
        boxes = []
        for t in tuples:
            t = tuple(t)
            if len(t) != len(logvars):
                raise StructuralError(f"tuple {t} does not match logvars {logvars}")
            boxes.append(tuple(frozenset((c,)) for c in t))
        return cls.from_boxes(logvars, boxes)

    @classmethod
    def product(cls, logvars, sets):
        return cls.from_boxes(logvars, [tuple(sets)])

    @classmethod
    def empty(cls, logvars=()):
        return cls(logvars, None)

    @classmethod
    def true(cls):
        return cls((), TOP)

    # inspection

    def __len__(self):
        return self.cardinality()

    def cardinality(self):
        return 0 if self.root is None else self.root.card()

    def is_empty(self):
        return self.root is None

    def boxes(self):
        return _paths(self.root, len(self.logvars))

    def tuples(self):
        out = set()
        for b in self.boxes():
            out.update(itertools.product(*b))
        return out

    def sorted_tuples(self):
        return sorted(self.tuples(), key=lambda t: tuple(map(const_key, t)))

    def values(self, var):
        """pi_var as a frozenset."""
        d = self._pos(var)
        seen, out = set(), set()
        level = [self.root] if self.root is not None else []
        for _ in range(d):
            nxt = []
            for n in level:
                for _, ch in n.edges:
                    if id(ch) not in seen:
                        seen.add(id(ch))
                        nxt.append(ch)
            level = nxt
        for n in level:
            for lab, _ in n.edges:
                out.update(lab)
        return frozenset(out)

    def is_singleton(self, var):
        return len(self.values(var)) == 1

    def __eq__(self, other):
        return isinstance(other, ConstraintTree) and self.logvars == other.logvars and self.root == other.root

    def __hash__(self):
        return hash((self.logvars, self.root))

    def same_relation(self, other):
        if set(self.logvars) != set(other.logvars):
            return False
        return self == other.reorder(self.logvars)

    def __repr__(self):
        return f"ConstraintTree({self.logvars}, {self.cardinality()} tuples)"

    def dump(self):
        """Indented listing of nodes and edges."""
        lines = [f"tree over ({', '.join(self.logvars)})"]
        if self.root is None:
            lines.append("  <empty>")
            return "\n".join(lines)

        def walk(n, depth):
            for lab, ch in n.edges:
                names = ",".join(sort_constants(lab))
                lines.append("  " * (depth + 1) + f"{self.logvars[depth]} in {{{names}}}")
                if ch is not TOP:
                    walk(ch, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)

    def _pos(self, var):
        try:
            return self.logvars.index(var)
        except ValueError:
            raise StructuralError(f"unknown logvar {var!r} (have {self.logvars})") from None

    # unary operations

    def reorder(self, order):
        order = tuple(order)
        if order == self.logvars:
            return self
        if sorted(order) != sorted(self.logvars):
            raise StructuralError(f"{order} is not a permutation of {self.logvars}")
        idx = [self._pos(v) for v in order]
        boxes = [tuple(b[i] for i in idx) for b in self.boxes()]
        return ConstraintTree.from_boxes(order, boxes)

    def project(self, vars):
        vars = tuple(vars)
        for v in vars:
            self._pos(v)
        if vars == self.logvars:
            return self
        rest = tuple(v for v in self.logvars if v not in vars)
        if self.logvars[: len(vars)] == vars:
            t = self
        elif set(vars) == set(self.logvars):
            return self.reorder(vars)
        else:
            idx = [self._pos(v) for v in vars]
            boxes = [tuple(b[i] for i in idx) for b in self.boxes()]
            return ConstraintTree.from_boxes(vars, boxes)
        del rest
        if not vars:
            return ConstraintTree((), None if t.root is None else TOP)
        return ConstraintTree(vars, _cut(t.root, 0, len(vars), {}))

    def drop(self, vars):
        vars = set(vars)
        return self.project([v for v in self.logvars if v not in vars])

    def rename(self, mapping):
        new = tuple(mapping.get(v, v) for v in self.logvars)
        return ConstraintTree(new, self.root)

    def select(self, var, values):
        """sigma_{var in values}."""
        d = self._pos(var)
        values = frozenset(values)
        return ConstraintTree(self.logvars, _select(self.root, 0, d, values, {}))

    def select_eq(self, var, value):
        return self.select(var, (value,))

    def select_tuple(self, vars, t):
        out = self
        for v, c in zip(vars, t):
            out = out.select_eq(v, c)
        return out

    # binary operations

    def _aligned(self, other):
        if set(other.logvars) != set(self.logvars):
            raise StructuralError(f"logvar sets differ: {self.logvars} vs {other.logvars}")
        return other.reorder(self.logvars)

    def intersect(self, other):
        o = self._aligned(other)
        if not self.logvars:
            return ConstraintTree((), TOP if self.root is not None and o.root is not None else None)
        return ConstraintTree(self.logvars, _intersect(self.root, o.root, {}))

    def difference(self, other):
        o = self._aligned(other)
        if not self.logvars:
            return ConstraintTree((), None if o.root is not None else self.root)
        return ConstraintTree(self.logvars, _minus(self.root, o.root, {}))

    def union(self, other):
        o = self._aligned(other)
        return ConstraintTree.from_boxes(self.logvars, self.boxes() + o.boxes())

    def issubset(self, other):
        return self.difference(other).is_empty()

    def isdisjoint(self, other):
        return self.intersect(other).is_empty()

    def join(self, other):
        """Natural join on shared logvars; result is ordered self's logvars, then other's new ones."""
        shared = tuple(v for v in self.logvars if v in other.logvars)
        r1 = tuple(v for v in self.logvars if v not in shared)
        r2 = tuple(v for v in other.logvars if v not in shared)
        a = self.reorder(shared + r1)
        b = other.reorder(shared + r2)
        if a.root is None or b.root is None:
            return ConstraintTree.empty(self.logvars + r2)
        if not shared:
            root = _graft(a.root, b.root, {}) if r1 else b.root
        elif not r1 and not r2:
            root = _intersect(a.root, b.root, {})
        else:
            root = _join(a.root, b.root, 0, len(shared), {})
        out = ConstraintTree(shared + r1 + r2, root)
        return out.reorder(self.logvars + r2)

    def cartesian(self, other):
        if set(self.logvars) & set(other.logvars):
            raise StructuralError("cartesian product needs disjoint logvars")
        return self.join(other)

    def split_on_overlap(self, other, vars=None, other_vars=None):
        """Partition self by whether pi_vars(t) occurs in pi_other_vars(other).

        Returns (common, exclusive); either may be empty.
        """
        vars = tuple(self.logvars if vars is None else vars)
        other_vars = tuple(vars if other_vars is None else other_vars)
        if len(vars) != len(other_vars):
            raise StructuralError("overlap variables do not line up")
        for v in vars:
            self._pos(v)
        proj = other.project(other_vars).rename(dict(zip(other_vars, vars)))
        rest = tuple(v for v in self.logvars if v not in vars)
        a = self.reorder(vars + rest)
        if not vars:
            if proj.root is None:
                return ConstraintTree.empty(self.logvars), self
            return self, ConstraintTree.empty(self.logvars)
        com, exc = _semi(a.root, proj.root, 0, len(vars), {}) if a.root is not None and proj.root is not None else (None, a.root)
        com = ConstraintTree(vars + rest, com).reorder(self.logvars)
        exc = ConstraintTree(vars + rest, exc).reorder(self.logvars)
        return com, exc

    # counting

    def count(self, Y, Z, t):
        """COUNT_{Y|Z}(t): how many Y-values co-occur with t's Z-values."""
        Y, Z = tuple(Y), tuple(Z)
        if set(Y) & set(Z):
            raise StructuralError("Y and Z must be disjoint")
        t = tuple(t)
        if len(t) != len(self.logvars):
            raise StructuralError("tuple width does not match the constraint")
        if self.select_tuple(self.logvars, t).is_empty():
            raise PreconditionError(f"{t} is not in the constraint")
        if not Y:
            return 1
        zs = [t[self._pos(z)] for z in Z]
        return self.select_tuple(Z, zs).project(Y).cardinality()

    def count_function(self, Y, Z):
        """COUNT_{Y|Z} as disjoint (Z-box, count) pieces covering pi_Z."""
        Y, Z = tuple(Y), tuple(Z)
        if set(Y) & set(Z):
            raise StructuralError("Y and Z must be disjoint")
        if self.root is None:
            return []
        if not Y:
            return [(b, 1) for b in self.project(Z).boxes()]
        t = self.project(Z + Y)
        return [(pre, sub.card()) for pre, sub in _prefix_paths(t.root, len(Z))]

    def count_normalized(self, Y, Z):
        """The common value of COUNT_{Y|Z}, or None if it varies (0 when empty)."""
        vals = {n for _, n in self.count_function(Y, Z)}
        if not vals:
            return 0
        if len(vals) == 1:
            return vals.pop()
        return None

    def is_count_normalized(self, Y, Z):
        return self.count_normalized(Y, Z) is not None

    # grouping

    def _cells(self, Z, keyed_boxes):
        groups = {}
        for box, key in keyed_boxes:
            groups.setdefault(key, []).append(box)
        out = []
        for key in sorted(groups):
            zrel = ConstraintTree.from_boxes(Z, groups[key])
            out.append((key, self.join(zrel)))
        return out

    def group_by_count(self, Y, Z):
        """Partition by COUNT_{Y|Z}; list of (count, cell) sorted by count."""
        Z = tuple(Z)
        return self._cells(Z, self.count_function(Y, Z))

    def group_by_values(self, var):
        """Partition by pi_var; list of (constant, cell) in constant order."""
        return [(c, self.select_eq(var, c)) for c in sort_constants(self.values(var))]

    def group_by_joint_count(self, X, com, excl):
        """Partition by (|pi_X sigma_{L=l}(com)|, |pi_X sigma_{L=l}(excl)|), L = other logvars."""
        L = tuple(v for v in self.logvars if v != X)
        base = self.project(L)

        def pieces(part):
            got = part.count_function((X,), L) if not part.is_empty() else []
            _, missing = base.split_on_overlap(part.project(L), L)
            return got + [(b, 0) for b in missing.boxes()]

        p1, p2 = pieces(com), pieces(excl)
        keyed = []
        for b1, n1 in p1:
            for b2, n2 in p2:
                m = _box_meet(b1, b2)
                if m is not None:
                    keyed.append((m, (n1, n2)))
        return self._cells(L, keyed)

    def group_by(self, f):
        """Generic GROUP-BY over explicit tuples; f maps a tuple to a sortable key."""
        groups = {}
        for t in self.tuples():
            groups.setdefault(f(t), []).append(t)
        return [(k, ConstraintTree.from_tuples(self.logvars, groups[k])) for k in sorted(groups)]


class TupleSet:
    """Explicit set of tuples; the reference the tree is tested against."""

    def __init__(self, logvars, tuples):
        self.logvars = tuple(logvars)
        self.tuples = frozenset(tuple(t) for t in tuples)

    @classmethod
    def of(cls, tree):
        return cls(tree.logvars, tree.tuples())

    def _i(self, v):
        return self.logvars.index(v)

    def __len__(self):
        return len(self.tuples)

    def __eq__(self, other):
        if set(self.logvars) != set(other.logvars):
            return False
        return self.tuples == other.reorder(self.logvars).tuples

    def reorder(self, order):
        idx = [self._i(v) for v in order]
        return TupleSet(order, {tuple(t[i] for i in idx) for t in self.tuples})

    def project(self, vars):
        return self.reorder(vars)

    def rename(self, mapping):
        return TupleSet([mapping.get(v, v) for v in self.logvars], self.tuples)

    def select_eq(self, var, value):
        i = self._i(var)
        return TupleSet(self.logvars, {t for t in self.tuples if t[i] == value})

    def join(self, other):
        shared = [v for v in self.logvars if v in other.logvars]
        extra = [v for v in other.logvars if v not in shared]
        si = [self._i(v) for v in shared]
        oi = [other._i(v) for v in shared]
        ei = [other._i(v) for v in extra]
        out = set()
        for a in self.tuples:
            for b in other.tuples:
                if all(a[i] == b[j] for i, j in zip(si, oi)):
                    out.add(a + tuple(b[j] for j in ei))
        return TupleSet(self.logvars + tuple(extra), out)

    def split_on_overlap(self, other, vars, other_vars=None):
        other_vars = vars if other_vars is None else other_vars
        keys = other.project(other_vars).tuples
        idx = [self._i(v) for v in vars]
        com = {t for t in self.tuples if tuple(t[i] for i in idx) in keys}
        return TupleSet(self.logvars, com), TupleSet(self.logvars, self.tuples - com)

    def count(self, Y, Z, t):
        if not Y:
            return 1
        zi = [self._i(z) for z in Z]
        yi = [self._i(y) for y in Y]
        return len({tuple(u[i] for i in yi) for u in self.tuples if all(u[i] == t[i] for i in zi)})

    def count_normalized(self, Y, Z):
        vals = {self.count(Y, Z, t) for t in self.tuples}
        if not vals:
            return 0
        return vals.pop() if len(vals) == 1 else None

    def group_by(self, f):
        groups = {}
        for t in self.tuples:
            groups.setdefault(f(t), set()).add(t)
        return [(k, TupleSet(self.logvars, groups[k])) for k in sorted(groups)]
