"""
The rewrite operators on small parfactors
=========================================

Each step rewrites parfactors without changing the ground model they
stand for (or sums out / conditions on randvars when that is the point).
Shown here: multiply and sum out, counting conversion, count
normalization, expansion of a counting formula, and absorbing evidence.
"""

import numpy as np

from liftedve.constraint import ConstraintTree
from liftedve.core import Atom, CountingFormula, Domain, Parfactor, Potential, Predicate, histogram_range
from liftedve.operators import EvidenceParfactor, absorb, count_convert, count_normalize, expand, multiply, positions, split, sum_out

B = ("true", "false")


def show(title, gs):
    print(f"-- {title}")
    for g in gs:
        print("  ", g)
        print("     tuples:", g.constraint.sorted_tuples()[:8], "..." if len(g.constraint) > 8 else "")
        print("     table:", np.round(g.potential.linear().ravel(), 4).tolist())


# %% multiply two propositional factors and sum out the shared randvar
A1, S, T = Predicate("A1", (), B), Predicate("S", (), B), Predicate("T", (), ("srl", "db"))
top = ConstraintTree.true()
g1 = Parfactor([Atom(A1, ()), Atom(S, ())], top, Potential([B, B], [[1, 2], [2, 1]]))
g2 = Parfactor([Atom(T, ()), Atom(A1, ())], top, Potential([T.range, B], [[3, 1], [2, 2]]))
(g12,) = multiply(g1, g2).added
show("product", [g12])
show("A1 summed out", sum_out(g12, [a.pred.name for a in g12.args].index("A1")).added)

# %% counting conversion: three interchangeable Attends randvars become one histogram
P = Domain("Person", ("ann", "bob", "carl"))
attends = Predicate("Attends", (P,), B)
g = Parfactor([Atom(attends, ("X",)), Atom(S, ())], ConstraintTree.product(("X",), [P.constants]), Potential([B, B], [[2, 1], [1, 3]]))
show("count-converted", count_convert(g, "X").added)

# %% count normalization: professors with one student vs two
Pd, Sd = Domain("Prof", tuple(f"p{i}" for i in range(1, 6))), Domain("Stud", tuple(f"s{i}" for i in range(1, 7)))
prof, sup = Predicate("Prof", (Pd,), B), Predicate("Supervises", (Pd, Sd), B)
C = ConstraintTree.from_tuples(
    ("P", "S"), [("p1", "s1"), ("p1", "s2"), ("p2", "s2"), ("p2", "s3"), ("p3", "s5"), ("p4", "s3"), ("p4", "s4"), ("p5", "s6")]
)
g = Parfactor([Atom(prof, ("P",)), Atom(sup, ("P", "S"))], C, Potential([B, B], [[1, 2], [3, 4]]))
parts = count_normalize(g, ("S",), ("P",)).added
show("count-normalized", parts)
for h in parts:
    show("Supervises summed out of one cell", sum_out(h, 1).added)

# %% expansion: counting friends inside and outside a sub-relation
people, others = ("ann", "bob", "carl"), ("dave", "ed", "fred", "gina")
F = Predicate("F", (Domain("P", people), Domain("Q", others)), B)
cf = CountingFormula(Atom(F, ("X", "Y")), "Y")
g = Parfactor([cf], ConstraintTree.product(("X", "Y"), [people, others]), Potential([histogram_range(2, 4)], [1, 2, 3, 4, 5]))
show("expanded", expand(g, 0, Atom(F, ("X", "Y")), ConstraintTree.product(("X", "Y"), [("ann", "bob"), ("dave", "ed")])).added)

# %% evidence: ten of fifty friendships observed true
Xd, Yd = Domain("X", ("x1",)), Domain("Y", tuple(f"y{j}" for j in range(1, 51)))
Sx, Fxy = Predicate("S", (Xd,), B), Predicate("F", (Xd, Yd), B)
g = Parfactor(
    [Atom(Sx, ("X",)), Atom(Fxy, ("X", "Y"))],
    ConstraintTree.product(("X", "Y"), [Xd.constants, Yd.constants]),
    Potential([B, B], [[1.1, 0.7], [0.9, 1.3]]),
)
ge = EvidenceParfactor(Fxy, ConstraintTree.product(positions(2), [("x1",), Yd.constants[:10]]), "true")
observed, rest = sorted(split(g, 1, ge.constraint).added, key=lambda h: len(h.constraint))
res = absorb(observed, 1, ge)
show(f"absorbed (exponent {res.extra['r']})", res.added)
show("unobserved part", [rest])
