import itertools

import pytest
from hypothesis import given, settings, strategies as st

from liftedve.constraint import ConstraintTree, TupleSet
from liftedve.errors import PreconditionError, StructuralError
from oracles import r_count, r_count_normalized, r_join, r_project, rel

PARENTS = [
    ("ann", "eric"),
    ("bob", "eric"),
    ("carl", "finn"),
    ("debbie", "finn"),
    ("carl", "gemma"),
    ("debbie", "gemma"),
]


@pytest.fixture
def parents():
    return ConstraintTree.from_tuples(("P", "C"), PARENTS)


def test_parent_counts(parents):
    assert parents.count(("P",), ("C",), ("ann", "eric")) == 2
    assert parents.count(("C",), ("P",), ("ann", "eric")) == 1
    assert parents.count(("C",), ("P",), ("carl", "finn")) == 2
    assert parents.count_normalized(("P",), ("C",)) == 2
    assert parents.count_normalized(("C",), ("P",)) is None


def test_count_outside_tuple(parents):
    with pytest.raises(PreconditionError):
        parents.count(("P",), ("C",), ("ann", "finn"))


def test_group_by_count_on_parents(parents):
    cells = parents.group_by_count(("C",), ("P",))
    assert [k for k, _ in cells] == [1, 2]
    assert set(cells[0][1].tuples()) == {("ann", "eric"), ("bob", "eric")}
    assert cells[1][1].cardinality() == 4


def test_supervision_partition():
    C = ConstraintTree.from_tuples(
        ("P", "S"),
        [("p1", "s1"), ("p1", "s2"), ("p2", "s2"), ("p2", "s3"), ("p3", "s5"), ("p4", "s3"), ("p4", "s4"), ("p5", "s6")],
    )
    cells = C.group_by_count(("S",), ("P",))
    assert [k for k, _ in cells] == [1, 2]
    assert set(cells[0][1].tuples()) == {("p3", "s5"), ("p5", "s6")}
    assert set(cells[1][1].tuples()) == {("p1", "s1"), ("p1", "s2"), ("p2", "s2"), ("p2", "s3"), ("p4", "s3"), ("p4", "s4")}


def test_canonical_form_is_independent_of_construction():
    a = ConstraintTree.from_tuples(("X", "Y"), [(x, y) for x in "abc" for y in "de"])
    b = ConstraintTree.product(("X", "Y"), ["cab", "ed"])
    c = ConstraintTree.from_boxes(("X", "Y"), [(frozenset("a"), frozenset("de")), (frozenset("bc"), frozenset("de"))])
    assert a == b == c and hash(a) == hash(b)


def test_dump_mentions_every_constant(parents):
    text = parents.dump()
    for p, c in PARENTS:
        assert p in text and c in text


def test_mismatched_logvars():
    a = ConstraintTree.product(("X",), ["ab"])
    b = ConstraintTree.product(("Y",), ["ab"])
    with pytest.raises(StructuralError):
        a.intersect(b)


def test_empty_and_true():
    e = ConstraintTree.empty(("X",))
    assert e.is_empty() and e.cardinality() == 0
    t = ConstraintTree.true()
    assert t.cardinality() == 1 and not t.is_empty()
    assert e.count_normalized(("X",), ()) == 0


# properties against explicit tuple sets

CONSTS = ["a", "b", "c", "d"]


@st.composite
def relations(draw, logvars=("X", "Y", "Z"), exact=False):
    k = len(logvars) if exact else draw(st.integers(1, len(logvars)))
    lv = tuple(logvars[:k])
    full = list(itertools.product(CONSTS[: draw(st.integers(1, 4))], repeat=k))
    ts = draw(st.lists(st.sampled_from(full), max_size=12))
    return lv, sorted(set(ts))


def tree(r):
    return ConstraintTree.from_tuples(*r)


@settings(max_examples=150, deadline=None)
@given(relations())
def test_tuples_roundtrip(r):
    assert set(tree(r).tuples()) == set(r[1])
    assert tree(r).cardinality() == len(r[1])


@settings(max_examples=150, deadline=None)
@given(relations(), st.data())
def test_project_matches_sets(r, data):
    lv = r[0]
    vars_ = data.draw(st.permutations(lv).map(lambda p: p[: max(1, len(p) - 1)]))
    got = tree(r).project(tuple(vars_))
    assert set(got.tuples()) == set(r_project(rel(*r), vars_)[1])
    assert got.logvars == tuple(vars_)


@settings(max_examples=150, deadline=None)
@given(relations(), relations())
def test_set_algebra(r1, r2):
    if r1[0] != r2[0]:
        return
    a, b = tree(r1), tree(r2)
    s1, s2 = set(r1[1]), set(r2[1])
    assert set(a.intersect(b).tuples()) == s1 & s2
    assert set(a.difference(b).tuples()) == s1 - s2
    assert set(a.union(b).tuples()) == s1 | s2
    assert a.issubset(b) == (s1 <= s2)
    assert a.isdisjoint(b) == (not (s1 & s2))
    assert (a == b) == (s1 == s2)


@settings(max_examples=150, deadline=None)
@given(relations(("X", "Y"), exact=True), relations(("Y", "Z"), exact=True))
def test_join_matches_sets(r1, r2):
    got = tree(r1).join(tree(r2))
    want = r_join(rel(*r1), rel(*r2))
    assert got.logvars == want[0]
    assert set(got.tuples()) == set(want[1])


@settings(max_examples=150, deadline=None)
@given(relations(), st.data())
def test_counts_match_sets(r, data):
    lv = r[0]
    if not r[1]:
        return
    Y = tuple(data.draw(st.lists(st.sampled_from(lv), unique=True, min_size=1)))
    rest = [v for v in lv if v not in Y]
    Z = tuple(data.draw(st.lists(st.sampled_from(rest), unique=True))) if rest else ()
    a = tree(r)
    R = rel(*r)
    for t in r[1]:
        assert a.count(Y, Z, t) == r_count(R, Y, Z, t)
    assert a.count_normalized(Y, Z) == r_count_normalized(R, Y, Z)
    cells = a.group_by_count(Y, Z)
    assert sum(c.cardinality() for _, c in cells) == len(r[1])
    for k, c in cells:
        assert c.count_normalized(Y, Z) == k


@settings(max_examples=150, deadline=None)
@given(relations(("X", "Y"), exact=True), relations(("X",), exact=True))
def test_split_on_overlap(r1, r2):
    a = tree(r1)
    com, exc = a.split_on_overlap(tree(r2), ("X",))
    keys = {t[0] for t in r2[1]}
    assert set(com.tuples()) == {t for t in r1[1] if t[0] in keys}
    assert set(exc.tuples()) == {t for t in r1[1] if t[0] not in keys}
    ts = TupleSet.of(a)
    c2, e2 = ts.split_on_overlap(TupleSet.of(tree(r2)), ("X",))
    assert c2 == TupleSet.of(com) and e2 == TupleSet.of(exc)


@settings(max_examples=100, deadline=None)
@given(relations(), st.data())
def test_reorder_and_rename(r, data):
    a = tree(r)
    order = tuple(data.draw(st.permutations(r[0])))
    b = a.reorder(order)
    assert b.same_relation(a)
    idx = [r[0].index(v) for v in order]
    assert set(b.tuples()) == {tuple(t[i] for i in idx) for t in r[1]}
    ren = a.rename({v: v.lower() for v in r[0]})
    assert ren.logvars == tuple(v.lower() for v in r[0])
    assert set(ren.tuples()) == set(r[1])


@settings(max_examples=100, deadline=None)
@given(relations(("X", "Y"), exact=True))
def test_select_and_values(r):
    a = tree(r)
    for x in CONSTS:
        got = a.select_eq("X", x)
        assert set(got.tuples()) == {t for t in r[1] if t[0] == x}
    assert a.values("Y") == frozenset(t[1] for t in r[1])


@settings(max_examples=100, deadline=None)
@given(relations(("X", "Y"), exact=True), relations(("X", "Y"), exact=True))
def test_joint_count_partition(r, other):
    a = tree(r)
    com, exc = a.split_on_overlap(tree(other), ("X", "Y"))
    for (kc, ke), cell in a.group_by_joint_count("Y", com, exc):
        for x in cell.values("X"):
            assert com.select_eq("X", x).cardinality() == kc
            assert exc.select_eq("X", x).cardinality() == ke
