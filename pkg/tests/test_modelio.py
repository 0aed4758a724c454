import random

import pytest
from hypothesis import given, settings, strategies as st

from liftedve.core import CountingFormula
from liftedve.engine import run_query
from liftedve.errors import ParseError
from liftedve.ground import ground_model
from liftedve.modelio import models_equal, parse_evidence, parse_model, print_evidence, print_model, read_model
from randmodels import random_evidence, random_model

WORKSHOP = """\
# people attending a workshop series
DOMAINS
Person = p..3

PREDICATES
Attends(Person) : {true, false}
Series : {true, false}
Topic : {srl, db}

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


def test_workshop_file():
    m = parse_model(WORKSHOP)
    assert [d.constants for d in m.domains.values()] == [("p1", "p2", "p3")]
    assert len(m.parfactors) == 2
    gm = ground_model(m)
    assert len(gm.randvars) == 5
    assert len(gm.factors) == 6


def test_constraint_forms():
    text = """
DOMAINS
P = {ann, bob, carl}
T = t..2
PREDICATES
Hot(T) : {true, false}
F(P, P) : {true, false}
PARFACTORS
factor #X[F(X, Y)], Hot(Z) | X in {ann, bob}; Y in {carl}; Z in {t2}
  (2,0) true 1
  (2,0) false 2
  (1,1) true 3
  (1,1) false 4
  (0,2) true 5
  (0,2) false 6
factor F(X, Y) | (X, Y) in {(ann, bob), (bob, ann)}
  true 0.5
  false 1.5
factor F(ann, Y) | Y in {bob}  # constants are allowed in atoms
  true 1
  false 1
"""
    m = parse_model(text)
    g1, g2, g3 = m.parfactors
    assert isinstance(g1.args[0], CountingFormula)
    assert g1.count_of(g1.args[0]) == 2
    assert g1.potential.value([(1, 1), "false"]) == 4
    assert set(g2.constraint.tuples()) == {("ann", "bob"), ("bob", "ann")}
    assert g3.constraint.cardinality() == 1


def test_evidence_lines():
    m = parse_model(WORKSHOP)
    assert parse_evidence("Attends(p1) = true\n", m) == {("Attends", ("p1",)): "true"}
    ev = parse_evidence("# two facts\nAttends(p2)=false\nSeries = true  # trailing comment\n", m)
    assert ev == {("Attends", ("p2",)): "false", ("Series", ()): "true"}
    assert parse_evidence(print_evidence(ev), m) == ev


@pytest.mark.parametrize(
    "text, line",
    [
        ("Attends(p1) = true\nAttends(p1) = false\n", 2),
        ("Attends(p9) = true\n", 1),
        ("Attends(p1) = maybe\n", 1),
        ("Attends(X) = true\n", 1),
        ("Series true\n", 1),
        ("\n\nNope(p1) = true\n", 3),
    ],
)
def test_evidence_errors(text, line):
    m = parse_model(WORKSHOP)
    with pytest.raises(ParseError) as e:
        parse_evidence(text, m)
    assert e.value.line == line
    assert e.value.category == "parse"


def _broken(old, new):
    assert old in WORKSHOP
    return WORKSHOP.replace(old, new, 1)


@pytest.mark.parametrize(
    "text, line",
    [
        (_broken("Attends(X), Series | all", "Attends(X), Seriez | all"), 11),
        (_broken("Attends(X), Series | all", "Attends(X, X), Series | all"), 11),
        (_broken("  true true 1\n", "  true maybe 1\n"), 12),
        (_broken("  true true 1\n", "  true true -1\n"), 12),
        (_broken("  true true 1\n", "  true true\n"), 12),
        (_broken("  true false 2\n", ""), 11),
        (_broken("Attends(Person) :", "Attends(Human) :"), 6),
        (_broken("factor Topic, Attends(X) | all", "factor Topic, Attends(X) | X in {p7}"), 16),
        (_broken("DOMAINS\n", ""), 2),
    ],
)
def test_model_errors_carry_positions(text, line):
    with pytest.raises(ParseError) as e:
        parse_model(text)
    assert e.value.line == line
    assert f"line {line}" in str(e.value)


def test_column_points_at_the_token():
    with pytest.raises(ParseError) as e:
        parse_model(_broken("  true true 1\n", "  true maybe 1\n"))
    assert e.value.column == 8


def test_round_trip_workshop(tmp_path):
    m = parse_model(WORKSHOP)
    text = print_model(m)
    again = parse_model(text)
    assert models_equal(m, again)
    assert print_model(again) == text
    p = tmp_path / "w.model"
    p.write_text(text)
    assert models_equal(read_model(p), m)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip_random(seed):
    rng = random.Random(seed)
    m = random_model(rng)
    text = print_model(m)
    again = parse_model(text)
    assert models_equal(m, again)
    assert print_model(again) == text
    ev = random_evidence(rng, m)
    assert parse_evidence(print_evidence(ev), again) == ev


def test_parsed_model_answers_queries():
    m = parse_model(WORKSHOP)
    res = run_query(m, ("Series", ()))
    assert sum(res.distribution.values()) == pytest.approx(1.0)
