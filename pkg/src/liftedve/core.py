"""Model vocabulary: domains, predicates, atoms, counting formulas,
histograms, potentials and parfactors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constraint import ConstraintTree, const_key
from .errors import InputError, StructuralError


@dataclass(frozen=True)
class Domain:
    name: str
    constants: tuple

    def __post_init__(self):
        object.__setattr__(self, "constants", tuple(self.constants))
        if not self.constants:
            raise InputError(f"domain {self.name} is empty")
        if len(set(self.constants)) != len(self.constants):
            raise InputError(f"domain {self.name} has repeated constants")

    def __len__(self):
        return len(self.constants)


@dataclass(frozen=True)
class Predicate:
    name: str
    domains: tuple
    range: tuple = ("true", "false")

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "range", tuple(self.range))
        if not self.range:
            raise InputError(f"predicate {self.name} has an empty range")
        if len(set(self.range)) != len(self.range):
            raise InputError(f"predicate {self.name} has repeated range values")

    @property
    def arity(self):
        return len(self.domains)

    def __repr__(self):
        return f"Predicate({self.name}/{self.arity})"


@dataclass(frozen=True)
class Const:
    """A constant used as an atom argument (before linearization)."""

    value: str

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Atom:
    pred: Predicate
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) != self.pred.arity:
            raise StructuralError(f"{self.pred.name} takes {self.pred.arity} arguments, got {len(self.args)}")

    is_count = False

    @property
    def atom(self):
        return self

    @property
    def logvars(self):
        """Distinct logvar arguments, in order of appearance."""
        out = []
        for a in self.args:
            if not isinstance(a, Const) and a not in out:
                out.append(a)
        return tuple(out)

    @property
    def is_linear(self):
        return all(not isinstance(a, Const) for a in self.args) and len(set(self.args)) == len(self.args)

    def rename(self, mapping):
        return Atom(self.pred, tuple(a if isinstance(a, Const) else mapping.get(a, a) for a in self.args))

    def domain_of(self, var):
        return self.pred.domains[self.args.index(var)]

    def __str__(self):
        return f"{self.pred.name}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class CountingFormula:
    atom: Atom
    counted: str

    def __post_init__(self):
        if self.counted not in self.atom.args:
            raise StructuralError(f"counted logvar {self.counted} does not occur in {self.atom}")

    is_count = True

    @property
    def pred(self):
        return self.atom.pred

    @property
    def logvars(self):
        return tuple(v for v in self.atom.logvars if v != self.counted)

    @property
    def is_linear(self):
        return self.atom.is_linear

    def rename(self, mapping):
        return CountingFormula(self.atom.rename(mapping), mapping.get(self.counted, self.counted))

    def __str__(self):
        return f"#{self.counted}[{self.atom}]"


# histograms


@lru_cache(maxsize=None)
def histogram_range(r, n):
    """All count vectors of length r summing to n, lexicographically descending."""
    if r < 1 or n < 0:
        raise StructuralError(f"no histograms for r={r}, n={n}")
    if r == 1:
        return ((n,),)
    out = []
    for first in range(n, -1, -1):
        for rest in histogram_range(r - 1, n - first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def histogram_index(r, n):
    return {h: i for i, h in enumerate(histogram_range(r, n))}


def histogram_count(r, n):
    return math.comb(n + r - 1, r - 1)


def histogram_add(h1, h2):
    if len(h1) != len(h2):
        raise StructuralError(f"histograms {h1} and {h2} have different keys")
    return tuple(a + b for a, b in zip(h1, h2))


def multiplicity(h):
    out = math.factorial(sum(h))
    for c in h:
        out //= math.factorial(c)
    return out


def mul_for_arg(arg, value):
    return multiplicity(value) if arg.is_count else 1


@lru_cache(maxsize=256)
def log_multiplicities(r, n):
    """log MUL(h) for every h in histogram_range(r, n), via exact integers."""
    return np.array([math.log(multiplicity(h)) for h in histogram_range(r, n)])


@lru_cache(maxsize=256)
def histogram_matrix(r, n):
    """Counts as an (len(range), r) integer array."""
    return np.array(histogram_range(r, n), dtype=np.int64).reshape(-1, r)


# potentials


class Potential:
    """Dense table over the Cartesian product of per-argument value lists.

    With ``log`` set the table holds natural logs (``-inf`` for zero).
    """

    __slots__ = ("ranges", "table", "log")

    def __init__(self, ranges, table, log=False):
        self.ranges = tuple(tuple(r) for r in ranges)
        shape = tuple(len(r) for r in self.ranges)
        table = np.asarray(table, dtype=float)
        if table.size != math.prod(shape):
            raise StructuralError(f"table has {table.size} entries, expected {math.prod(shape)}")
        self.table = table.reshape(shape)
        self.log = bool(log)

    @classmethod
    def build(cls, ranges, fn, log=False):
        ranges = tuple(tuple(r) for r in ranges)
        vals = [fn(*v) for v in itertools.product(*ranges)]
        return cls(ranges, np.array(vals, dtype=float), log)

    @property
    def size(self):
        return self.table.size

    def index(self, valuation):
        if len(valuation) != len(self.ranges):
            raise StructuralError("valuation length does not match the potential")
        idx = []
        for v, r in zip(valuation, self.ranges):
            try:
                idx.append(r.index(v))
            except ValueError:
                raise StructuralError(f"value {v!r} not in range {r}") from None
        return tuple(idx)

    def lookup(self, valuation):
        return float(self.table[self.index(valuation)])

    def value(self, valuation):
        """Linear-scale value regardless of storage."""
        x = self.lookup(valuation)
        return math.exp(x) if self.log else x

    def linear(self):
        return np.exp(self.table) if self.log else self.table

    def logs(self):
        if self.log:
            return self.table
        with np.errstate(divide="ignore"):
            return np.log(self.table)

    def as_log(self):
        return self if self.log else Potential(self.ranges, self.logs(), True)

    def as_linear(self):
        return Potential(self.ranges, self.linear(), False) if self.log else self


# parfactors


def arg_range(arg, n=None):
    if arg.is_count:
        return histogram_range(len(arg.pred.range), n)
    return arg.pred.range


class Parfactor:
    """phi(args) | constraint.

    The constraint ranges over the atom logvars plus the counted logvars,
    with no others. Each tuple of the non-counted logvars stands for one
    ground factor; a counting formula counts its logvar within that slice.
    ``potential`` may be None for shape-only parfactors used in cost
    estimates.
    """

    __slots__ = ("args", "constraint", "potential", "_ranges", "cache")

    def __init__(self, args, constraint, potential=None, check=True):
        self.args = tuple(args)
        self.constraint = constraint
        self.potential = potential
        self._ranges = None
        self.cache = {}
        if check:
            self._check()

    def _check(self):
        if not self.is_linear:
            return
        counted = self.counted
        if len(set(counted)) != len(counted):
            raise StructuralError("a logvar is counted twice")
        lv = set(self.logvars)
        for a in self.args:
            inside = set(a.atom.logvars) & set(counted)
            if inside - ({a.counted} if a.is_count else set()):
                raise StructuralError("a counted logvar occurs outside its counting formula")
        if set(self.constraint.logvars) != lv | set(counted):
            raise StructuralError(
                f"constraint over {self.constraint.logvars} does not match logvars {tuple(lv)} + counted {counted}"
            )
        if self.potential is not None:
            t = self.potential.table
            if np.isnan(t).any() or (np.isposinf(t).any()) or (not self.potential.log and (t < 0).any()):
                raise StructuralError("potential entries must be finite and nonnegative")
            ranges = self.ranges
            if tuple(len(r) for r in ranges) != self.potential.table.shape:
                raise StructuralError(f"potential shape {self.potential.table.shape} does not match arguments")

    @property
    def is_linear(self):
        return all(a.is_linear for a in self.args)

    @property
    def logvars(self):
        """Non-counted logvars, in order of appearance."""
        out = []
        counted = set(self.counted)
        for a in self.args:
            for v in a.atom.logvars:
                if v not in counted and v not in out:
                    out.append(v)
        return tuple(out)

    @property
    def counted(self):
        return tuple(a.counted for a in self.args if a.is_count)

    @property
    def ranges(self):
        if self._ranges is None:
            self._ranges = tuple(arg_range(a, self.count_of(a)) if a.is_count else a.pred.range for a in self.args)
        return self._ranges

    def count_of(self, cf):
        """Number of randvars a counting formula covers in each ground factor."""
        c = self.constraint.project(self.logvars + (cf.counted,))
        n = c.count_normalized((cf.counted,), self.logvars)
        if n is None:
            raise StructuralError(f"{cf.counted} is not count-normalized in {self}")
        return n

    @property
    def size(self):
        return math.prod(len(r) for r in self.ranges)

    @property
    def n_groundings(self):
        return self.constraint.project(self.logvars).cardinality()

    @property
    def log(self):
        return self.potential is not None and self.potential.log

    def table(self):
        return self.potential.table

    def with_(self, args=None, constraint=None, potential=None, check=True):
        return Parfactor(
            self.args if args is None else args,
            self.constraint if constraint is None else constraint,
            self.potential if potential is None else potential,
            check=check,
        )

    def rename(self, mapping):
        return Parfactor(
            [a.rename(mapping) for a in self.args],
            self.constraint.rename(mapping),
            self.potential,
            check=False,
        )

    def skeleton(self):
        sk = Parfactor(self.args, self.constraint, None, check=False)
        sk._ranges = self._ranges
        sk.cache = self.cache
        return sk

    def __str__(self):
        args = ", ".join(map(str, self.args))
        return f"phi({args}) | {len(self.constraint)} tuples over ({','.join(self.constraint.logvars)})"

    __repr__ = __str__


def fresh_name(base, taken):
    base = base.rstrip("'0123456789_") or "V"
    for i in itertools.count(1):
        cand = f"{base}{i}"
        if cand not in taken:
            return cand


def standardize_apart(g, taken):
    """Rename g's logvars so none collides with ``taken``; returns (g', mapping)."""
    used = set(taken)
    mapping = {}
    for v in g.constraint.logvars:
        if v in used:
            mapping[v] = fresh_name(v, used | set(g.constraint.logvars) | set(mapping.values()))
        used.add(mapping.get(v, v))
    if not mapping:
        return g, {}
    return g.rename(mapping), mapping


def linearize(g):
    """Give every atom argument its own logvar.

    Constants become fresh logvars restricted to that constant; a logvar
    repeated inside one atom is replaced by a copy constrained equal to it.
    """
    if g.is_linear:
        return g
    c = g.constraint
    taken = set(c.logvars)
    for a in g.args:
        taken.update(v for v in a.atom.args if not isinstance(v, Const))
    new_args = []
    for a in g.args:
        atom = a.atom
        seen = set()
        new_terms = []
        for pos, t in enumerate(atom.args):
            if isinstance(t, Const):
                v = fresh_name(atom.pred.domains[pos].name[:1].upper() or "C", taken)
                taken.add(v)
                c = c.cartesian(ConstraintTree.product((v,), [(t.value,)]))
                new_terms.append(v)
            elif t in seen:
                v = fresh_name(t, taken)
                taken.add(v)
                c = _equal_copy(c, t, v)
                new_terms.append(v)
            else:
                seen.add(t)
                new_terms.append(t)
        new_atom = Atom(atom.pred, new_terms)
        new_args.append(CountingFormula(new_atom, a.counted) if a.is_count else new_atom)
    return Parfactor(new_args, c, g.potential)


def _equal_copy(c, var, copy):
    """Extend c with a logvar ``copy`` that always equals ``var``."""
    boxes = []
    i = c.logvars.index(var)
    for b in c.boxes():
        for x in b[i]:
            nb = list(b)
            nb[i] = frozenset((x,))
            boxes.append(tuple(nb) + (frozenset((x,)),))
    return ConstraintTree.from_boxes(c.logvars + (copy,), boxes)


def randvars_of(arg, constraint):
    """Ground randvars covered by an argument: set of (pred name, constants)."""
    atom = arg.atom
    t = constraint.project(atom.args)
    return {(atom.pred.name, tup) for tup in t.tuples()}


class Model:
    """Domains, predicates and parfactors."""

    def __init__(self, domains=(), predicates=(), parfactors=()):
        self.domains = {d.name: d for d in domains}
        self.predicates = {p.name: p for p in predicates}
        self.parfactors = list(parfactors)

    def add(self, g):
        self.parfactors.append(g)
        return g

    def domain(self, name):
        try:
            return self.domains[name]
        except KeyError:
            raise InputError(f"unknown domain {name!r}") from None

    def predicate(self, name):
        try:
            return self.predicates[name]
        except KeyError:
            raise InputError(f"unknown predicate {name!r}") from None

    def randvars(self):
        out = set()
        for g in self.parfactors:
            lg = linearize(g)
            for a in lg.args:
                out |= randvars_of(a, lg.constraint)
        return out

    def __repr__(self):
        return f"Model({len(self.domains)} domains, {len(self.predicates)} predicates, {len(self.parfactors)} parfactors)"


def sorted_consts(cs):
    return sorted(cs, key=const_key)


def parse_ground_atom(text, model):
    """``P(a,b)`` -> (name, (a, b)), checked against the model's declarations."""
    text = text.strip()
    if "(" in text:
        if not text.endswith(")"):
            raise InputError(f"malformed ground atom {text!r}")
        name, rest = text[:-1].split("(", 1)
        consts = tuple(s.strip() for s in rest.split(",")) if rest.strip() else ()
    else:
        name, consts = text, ()
    name = name.strip()
    pred = model.predicate(name)
    if len(consts) != pred.arity:
        raise InputError(f"{name} takes {pred.arity} arguments, got {len(consts)}")
    for c, d in zip(consts, pred.domains):
        if c not in d.constants:
            raise InputError(f"{c!r} is not in domain {d.name}")
    return name, consts
