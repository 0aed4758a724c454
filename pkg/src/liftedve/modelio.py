"""Text formats for models and evidence.

Model files have three sections::

    DOMAINS
    Person = {ann, bob, carl}
    Topic = t..3                  # t1, t2, t3

    PREDICATES
    Attends(Person) : {true, false}
    Series : {true, false}

    PARFACTORS
    factor Attends(X), Series | all
      true true 1.5
      true false 0.5
      false true 1
      false false 1
    factor #X[Attends(X)], Hot(Y) | X in {ann, bob}; Y in {t1}
      ...
    factor Friends(X, Y) | (X, Y) in {(ann, bob), (bob, ann)}
      ...

Logvars start with an uppercase letter, constants do not. Each potential
row lists one value per argument (a histogram is written ``(2,1)``, in
range order) followed by a nonnegative weight; every row must be given.
Evidence files hold one ``Pred(c1,...,cn) = value`` per line. ``#`` starts a
comment everywhere.
"""

from __future__ import annotations

import itertools
import re

import numpy as np

from .constraint import ConstraintTree, sort_constants
from .core import Atom, Const, CountingFormula, Domain, Model, Parfactor, Potential, Predicate, linearize
from .errors import LiftedError, ParseError

_NAME = r"[A-Za-z_][A-Za-z0-9_\-']*"
_TERM = r"[A-Za-z0-9_\-']+"
SECTIONS = ("DOMAINS", "PREDICATES", "PARFACTORS")


def _strip(line):
    i = line.find("#")
    # '#' directly followed by a logvar and '[' is a counting formula, not a comment
    while i >= 0 and re.match(r"#\s*[A-Z][A-Za-z0-9_']*\s*\[", line[i:]):
        i = line.find("#", i + 1)
    return line if i < 0 else line[:i]


class _Line:
    def __init__(self, no, text):
        self.no = no
        self.text = text

    def col(self, fragment):
        k = self.text.find(fragment)
        return k + 1 if k >= 0 else 1

    def error(self, message, fragment=None):
        return ParseError(message, self.no, self.col(fragment) if fragment else 1)


def _set_items(line, body, what):
    body = body.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise line.error(f"expected {{...}} for {what}", body[:1] or None)
    inner = body[1:-1].strip()
    if not inner:
        return []
    return [x.strip() for x in inner.split(",")]


def _split_top(text, sep=","):
    """Split on ``sep`` outside of (), [] and {}."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def _parse_domain(line, text, domains):
    if "=" not in text:
        raise line.error("domain lines look like 'Name = {a, b}' or 'Name = p..5'")
    name, body = (s.strip() for s in text.split("=", 1))
    if not re.fullmatch(_NAME, name):
        raise line.error(f"bad domain name {name!r}", name)
    if name in domains:
        raise line.error(f"domain {name} declared twice", name)
    m = re.fullmatch(r"(" + _TERM + r")\.\.(\d+)", body)
    if m:
        prefix, n = m.group(1), int(m.group(2))
        if n < 1:
            raise line.error("a domain needs at least one constant", body)
        consts = tuple(f"{prefix}{i}" for i in range(1, n + 1))
    else:
        consts = tuple(_set_items(line, body, "a domain"))
    for c in consts:
        if not re.fullmatch(_TERM, c) or c[0].isupper():
            raise line.error(f"bad constant {c!r} (constants start lowercase or with a digit)", c)
    try:
        return Domain(name, consts)
    except LiftedError as e:
        raise line.error(str(e), name) from None


def _parse_predicate(line, text, domains, preds):
    if ":" not in text:
        raise line.error("predicate lines look like 'Name(Dom, ...) : {v1, v2}'")
    head, body = text.rsplit(":", 1)
    head = head.strip()
    m = re.fullmatch(r"(" + _NAME + r")\s*(?:\((.*)\))?", head)
    if not m:
        raise line.error(f"bad predicate declaration {head!r}", head)
    name = m.group(1)
    if name in preds:
        raise line.error(f"predicate {name} declared twice", name)
    doms = []
    if m.group(2) is not None and m.group(2).strip():
        for d in m.group(2).split(","):
            d = d.strip()
            if d not in domains:
                raise line.error(f"undeclared domain {d!r}", d)
            doms.append(domains[d])
    rng = _set_items(line, body, "a range")
    for v in rng:
        if not re.fullmatch(_TERM, v):
            raise line.error(f"bad range value {v!r}", v)
    try:
        return Predicate(name, tuple(doms), tuple(rng))
    except LiftedError as e:
        raise line.error(str(e), name) from None


def _parse_atom(line, text, preds):
    text = text.strip()
    m = re.fullmatch(r"(" + _NAME + r")\s*(?:\((.*)\))?", text)
    if not m:
        raise line.error(f"bad atom {text!r}", text[:10])
    name = m.group(1)
    if name not in preds:
        raise line.error(f"undeclared predicate {name!r}", name)
    p = preds[name]
    terms = [t.strip() for t in m.group(2).split(",")] if m.group(2) and m.group(2).strip() else []
    if len(terms) != p.arity:
        raise line.error(f"{name} takes {p.arity} arguments, got {len(terms)}", name)
    out = []
    for t, d in zip(terms, p.domains):
        if not re.fullmatch(_TERM, t):
            raise line.error(f"bad term {t!r}", t)
        if t[0].isupper():
            out.append(t)
        else:
            if t not in d.constants:
                raise line.error(f"{t!r} is not in domain {d.name}", t)
            out.append(Const(t))
    return Atom(p, tuple(out))


def _parse_arg(line, text, preds):
    text = text.strip()
    m = re.fullmatch(r"#\s*([A-Z][A-Za-z0-9_']*)\s*\[(.*)\]", text)
    if m:
        atom = _parse_atom(line, m.group(2), preds)
        x = m.group(1)
        if x not in atom.args:
            raise line.error(f"counted logvar {x} does not occur in {atom}", text)
        return CountingFormula(atom, x)
    return _parse_atom(line, text, preds)


def _logvar_domains(line, args):
    doms = {}
    for a in args:
        for t, d in zip(a.atom.args, a.atom.pred.domains):
            if isinstance(t, Const):
                continue
            if doms.setdefault(t, d) != d:
                raise line.error(f"logvar {t} is used with domains {doms[t].name} and {d.name}", t)
    return doms


def _parse_constraint(line, text, doms):
    text = text.strip()
    order = list(doms)
    if text == "all":
        return ConstraintTree.product(tuple(order), [doms[v].constants for v in order])
    m = re.fullmatch(r"\(([^)]*)\)\s+in\s+(\{.*\})", text)
    if m:
        vars_ = tuple(v.strip() for v in m.group(1).split(","))
        if sorted(vars_) != sorted(order):
            raise line.error(f"tuple constraint must list exactly the logvars {', '.join(order)}", text[:1])
        inner = m.group(2).strip()[1:-1].strip()
        tuples = []
        if inner:
            for item in _split_top(inner):
                item = item.strip()
                if not (item.startswith("(") and item.endswith(")")):
                    raise line.error(f"malformed tuple {item!r}", item)
                vals = tuple(x.strip() for x in item[1:-1].split(","))
                if len(vals) != len(vars_):
                    raise line.error(f"tuple {item} has {len(vals)} values, expected {len(vars_)}", item)
                for v, x in zip(vars_, vals):
                    if x not in doms[v].constants:
                        raise line.error(f"{x!r} is not in domain {doms[v].name} of {v}", x)
                tuples.append(vals)
        return ConstraintTree.from_tuples(vars_, tuples)
    sets = {}
    vars_ = []
    for part in text.split(";"):
        part = part.strip()
        mm = re.fullmatch(r"([A-Z][A-Za-z0-9_']*)\s+in\s+(.*)", part)
        if not mm:
            raise line.error(f"bad constraint {part!r}; use 'all', 'X in {{...}}; ...' or '(X, Y) in {{(...)}}'", part[:5])
        v = mm.group(1)
        if v not in doms:
            raise line.error(f"{v} is not a logvar of this parfactor", v)
        if v in sets:
            raise line.error(f"{v} constrained twice", v)
        vals = _set_items(line, mm.group(2), f"the values of {v}")
        for x in vals:
            if x not in doms[v].constants:
                raise line.error(f"{x!r} is not in domain {doms[v].name} of {v}", x)
        sets[v] = vals
        vars_.append(v)
    for v in order:
        if v not in sets:
            vars_.append(v)
            sets[v] = doms[v].constants
    return ConstraintTree.product(tuple(vars_), [sets[v] for v in vars_])


def _parse_value(line, token, arg):
    if arg.is_count:
        m = re.fullmatch(r"\((.*)\)", token)
        if not m:
            raise line.error(f"histogram values are written like (2,1), got {token!r}", token)
        try:
            h = tuple(int(x) for x in m.group(1).split(","))
        except ValueError:
            raise line.error(f"bad histogram {token!r}", token) from None
        return h
    if token not in arg.pred.range:
        raise line.error(f"{token!r} is not in the range of {arg.pred.name}", token)
    return token


def _tokens(text):
    return re.findall(r"\([^)]*\)|\S+", text)


def _finish_factor(header_line, args, C, rows):
    probe = Parfactor(args, C, None, check=False)
    try:
        lin = linearize(probe)
        ranges = lin.ranges
    except LiftedError as e:
        raise header_line.error(str(e)) from None
    shape = tuple(len(r) for r in ranges)
    table = np.full(shape, np.nan)
    for line, vals, w in rows:
        idx = []
        for v, r, a in zip(vals, ranges, args):
            if v not in r:
                raise line.error(f"value {v} is outside the range of {a}", str(v))
            idx.append(r.index(v))
        if not np.isnan(table[tuple(idx)]):
            raise line.error("row given twice")
        table[tuple(idx)] = w
    if np.isnan(table).any():
        k = np.argwhere(np.isnan(table))[0]
        missing = tuple(r[i] for r, i in zip(ranges, k))
        raise header_line.error(f"potential row missing for {' '.join(map(_fmt_value, missing))}")
    try:
        return Parfactor(args, C, Potential(ranges, table))
    except LiftedError as e:
        raise header_line.error(str(e)) from None


def parse_model(text):
    domains, preds, pfs = {}, {}, []
    section = None
    cur = None  # (line, args, C, rows)
    for no, raw in enumerate(text.splitlines(), 1):
        line = _Line(no, raw)
        body = _strip(raw).strip()
        if not body:
            continue
        if body in SECTIONS:
            if cur:
                pfs.append(_finish_factor(*cur))
                cur = None
            if section is not None and SECTIONS.index(body) <= SECTIONS.index(section):
                raise line.error(f"section {body} out of order")
            section = body
            continue
        if section is None:
            raise line.error("expected a DOMAINS section first")
        if section == "DOMAINS":
            d = _parse_domain(line, body, domains)
            domains[d.name] = d
        elif section == "PREDICATES":
            p = _parse_predicate(line, body, domains, preds)
            preds[p.name] = p
        elif body.startswith("factor ") or body == "factor":
            if cur:
                pfs.append(_finish_factor(*cur))
            head = body[len("factor") :]
            if "|" not in head:
                raise line.error("a factor line needs '| constraint'")
            arg_text, cons_text = head.split("|", 1)
            args = [_parse_arg(line, a, preds) for a in _split_top(arg_text) if a.strip()]
            if not args:
                raise line.error("a factor needs at least one argument")
            doms = _logvar_domains(line, args)
            C = _parse_constraint(line, cons_text, doms)
            cur = (line, args, C, [])
        else:
            if cur is None:
                raise line.error("potential row outside a factor")
            toks = _tokens(body)
            args = cur[1]
            if len(toks) != len(args) + 1:
                raise line.error(f"expected {len(args)} values and a weight", toks[0] if toks else None)
            try:
                w = float(toks[-1])
            except ValueError:
                raise line.error(f"bad weight {toks[-1]!r}", toks[-1]) from None
            if not np.isfinite(w) or w < 0:
                raise line.error("weights must be finite and nonnegative", toks[-1])
            vals = [_parse_value(line, t, a) for t, a in zip(toks, args)]
            cur[3].append((line, vals, w))
    if cur:
        pfs.append(_finish_factor(*cur))
    return Model(domains.values(), preds.values(), pfs)


def parse_evidence(text, model):
    """``Pred(c1,...) = value`` lines -> dict (pred, consts) -> value."""
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = _Line(no, raw)
        body = _strip(raw).strip()
        if not body:
            continue
        if "=" not in body:
            raise line.error("evidence lines look like 'Pred(c1, c2) = value'")
        lhs, value = (s.strip() for s in body.rsplit("=", 1))
        atom = _parse_atom(line, lhs, model.predicates)
        if any(not isinstance(t, Const) for t in atom.args):
            raise line.error(f"evidence must be ground, got {lhs}", lhs)
        if value not in atom.pred.range:
            raise line.error(f"{value!r} is not in the range of {atom.pred.name}", value)
        key = (atom.pred.name, tuple(t.value for t in atom.args))
        if key in out and out[key] != value:
            raise line.error(f"conflicting evidence for {lhs}: {out[key]} and {value}", lhs)
        out[key] = value
    return out


def read_model(path):
    with open(path) as f:
        return parse_model(f.read())


def read_evidence(path, model):
    with open(path) as f:
        return parse_evidence(f.read(), model)


# printing


def _fmt_value(v):
    return "(" + ",".join(map(str, v)) + ")" if isinstance(v, tuple) else str(v)


def _fmt_term(t):
    return t.value if isinstance(t, Const) else t


def _fmt_atom(a):
    if not a.args:
        return a.pred.name
    return f"{a.pred.name}({', '.join(_fmt_term(t) for t in a.args)})"


def _fmt_arg(a):
    return f"#{a.counted}[{_fmt_atom(a.atom)}]" if a.is_count else _fmt_atom(a)


def _fmt_weight(w):
    return repr(float(w))


def _fmt_constraint(g, doms):
    C = g.constraint
    order = tuple(doms)
    full = ConstraintTree.product(order, [doms[v].constants for v in order]) if order else None
    if order and C == full:
        return "all"
    if not order:
        return "all"
    boxes = C.boxes()
    if len(boxes) == 1:
        parts = [f"{v} in {{{', '.join(sort_constants(s))}}}" for v, s in zip(C.logvars, boxes[0])]
        rebuilt = ConstraintTree.product(C.logvars, [sort_constants(s) for s in boxes[0]])
        if rebuilt == C:
            # the parser appends unlisted logvars in order; list them all to keep the order
            return "; ".join(parts)
    tuples = ", ".join("(" + ", ".join(t) + ")" for t in C.sorted_tuples())
    return f"({', '.join(C.logvars)}) in {{{tuples}}}"


def print_model(model):
    lines = ["DOMAINS"]
    for d in model.domains.values():
        lines.append(f"{d.name} = {{{', '.join(d.constants)}}}")
    lines += ["", "PREDICATES"]
    for p in model.predicates.values():
        head = p.name + (f"({', '.join(d.name for d in p.domains)})" if p.domains else "")
        lines.append(f"{head} : {{{', '.join(p.range)}}}")
    lines += ["", "PARFACTORS"]
    for g in model.parfactors:
        dummy = _Line(0, "")
        doms = _logvar_domains(dummy, g.args)
        lines.append(f"factor {', '.join(_fmt_arg(a) for a in g.args)} | {_fmt_constraint(g, doms)}")
        ranges = linearize(g).ranges
        lin = g.potential.linear()
        for idx in itertools.product(*(range(len(r)) for r in ranges)):
            vals = " ".join(_fmt_value(r[i]) for r, i in zip(ranges, idx))
            lines.append(f"  {vals} {_fmt_weight(lin[idx])}")
    return "\n".join(lines) + "\n"


def print_evidence(evidence):
    out = []
    for (name, consts), v in sorted(evidence.items()):
        out.append(f"{name}({', '.join(consts)}) = {v}" if consts else f"{name} = {v}")
    return "\n".join(out) + ("\n" if out else "")


def models_equal(a, b):
    """Structural equality: same domains, predicates and parfactors in order."""
    if list(a.domains.values()) != list(b.domains.values()):
        return False
    if list(a.predicates.values()) != list(b.predicates.values()):
        return False
    if len(a.parfactors) != len(b.parfactors):
        return False
    for g, h in zip(a.parfactors, b.parfactors):
        if g.args != h.args or g.constraint != h.constraint:
            return False
        if not np.array_equal(g.potential.linear(), h.potential.linear()):
            return False
    return True
