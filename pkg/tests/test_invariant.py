from fractions import Fraction

from recbound.invariant import (
    Polyhedron,
    abstract_conj,
    farkas_entails,
    invariant_map,
    is_empty,
    minimize,
    propagate,
)
from recbound.symbolic import Lin, floor_div

from .conftest import corpus_cfg

n, i, j, x, w = (Lin.var(v) for v in ("n", "i", "j", "x", "w"))


def _certificate_ok(g: Polyhedron, target: Lin, ent) -> bool:
    combo = Lin.constant(ent.slack)
    for k, y in ent.multipliers.items():
        combo = combo + g.members[k].scale(y)
    return ent.slack >= 0 and all(y >= 0 for y in ent.multipliers.values()) and combo == target


def test_entails_with_slack():
    g = Polyhedron([n - 2])
    e = farkas_entails(g, n - 1)
    assert e.holds and e.multipliers == {0: 1} and e.slack == 1
    assert _certificate_ok(g, n - 1, e)


def test_entails_index_gap():
    g = Polyhedron([j - i])
    e = farkas_entails(g, j - i)
    assert e.holds and _certificate_ok(g, j - i, e)


def test_not_entailed_single_point():
    g = Polyhedron([n - 1, 1 - n])
    assert not farkas_entails(g, n - 2).holds


def test_emptiness():
    assert is_empty(Polyhedron([x, -x - 1]))
    assert not is_empty(Polyhedron([n - 2, n - w.scale(2), w.scale(2) - n + 1, w - 1]))
    assert not is_empty(Polyhedron([]))
    assert farkas_entails(Polyhedron([x, -x - 1]), n).vacuous


def test_minimize():
    assert minimize(Polyhedron([n - 2]), n) == 2
    assert minimize(Polyhedron([]), n) is None


def test_floor_abstraction_pair():
    g = abstract_conj([floor_div(n, 2) - 1])
    assert len(g) == 3
    # n = 3 gives floor 1 and must be inside; n = 1 must not admit floor >= 1
    names = g.variables()
    fv = next(v for v in names if v != "n")
    assert g.contains({"n": Fraction(3), fv: Fraction(1)})
    assert not g.contains({"n": Fraction(1), fv: Fraction(1)})


def test_corpus_invariants_are_floor_free():
    for name in ("merge_sort", "closest_pair", "karatsuba", "strassen"):
        inv = invariant_map(corpus_cfg(name))
        for d in inv.values():
            for conj in d:
                assert all(not a.floors() for a in conj)


def test_propagation_covers_nonterminal_labels():
    c = corpus_cfg("merge_sort")
    full = propagate(c, invariant_map(c))
    for name, fc in c.functions.items():
        for lab in fc.kinds:
            assert (name, lab) in full
