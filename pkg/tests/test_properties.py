"""Randomized property suites: Farkas, floors, abstraction soundness, deduction completeness, LP exactness."""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from recbound.abstraction import AbstractedTriple, AbstractionSpace, floor_constraints, substitute
from recbound.constraints import ConstraintTriple
from recbound.driver import _pipeline, corpus_config, load_cfg
from recbound.invariant import Polyhedron, farkas_entails, invariant_map, is_empty
from recbound.lpsolve import EQ, GE, LE, LPProblem, check_farkas, dual_objective, optimize
from recbound.positivstellensatz import assemble_lp, certify_block, decomposition_poly, deduction_check, replay
from recbound.symbolic import Floor, Lin, Poly, Var
from recbound.template import build_template

from . import _lift

F = Fraction
SETTINGS = dict(deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
NAMES = ("x", "y", "z")


# ---------------------------------------------------------------------------
# Farkas entailment against vertex enumeration


def _solve(rows: list[list[Fraction]], rhs: list[Fraction]):
    """Unique solution of a square system, or None when singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        for i in range(n):
            if i != col and m[i][col]:
                f = m[i][col] / m[col][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def _vertices(atoms: list[Lin], dim: int) -> list[dict[str, Fraction]]:
    names = NAMES[:dim]
    out = []
    for combo in itertools.combinations(atoms, dim):
        rows = [[a.coeff(Var(v)) for v in names] for a in combo]
        sol = _solve(rows, [-a.const for a in combo])
        if sol is None:
            continue
        pt = dict(zip(names, sol))
        if all(a.eval(pt) >= 0 for a in atoms):
            out.append(pt)
    return out


@st.composite
def farkas_instances(draw):
    dim = draw(st.integers(1, 3))
    names = NAMES[:dim]
    coef = st.integers(-3, 3)

    def lin():
        return Lin([(Var(v), F(draw(coef))) for v in names], draw(st.integers(-6, 6)))

    atoms = [lin() for _ in range(draw(st.integers(1, 4)))]
    box = [Lin.var(v) + 5 for v in names] + [5 - Lin.var(v) for v in names]
    return dim, atoms, box, lin()


def _certificate_ok(g: Polyhedron, target: Lin, ent) -> bool:
    combo = Lin.constant(ent.slack)
    for k, y in ent.multipliers.items():
        combo = combo + g.members[k].scale(y)
    return ent.slack >= 0 and all(y >= 0 for y in ent.multipliers.values()) and combo == target


@settings(max_examples=500, **SETTINGS)
@given(farkas_instances())
def test_farkas_matches_vertex_enumeration(inst):
    dim, atoms, box, target = inst
    members = [a for a in atoms + box if not a.is_const()]
    consts = [a for a in atoms + box if a.is_const()]
    if any(a.const < 0 for a in consts):
        members.append(Lin.constant(-1))
    g = Polyhedron(members)
    verts = _vertices([m for m in members if not m.is_const()], dim)
    empty = not verts or any(a.const < 0 for a in consts)
    assert is_empty(g) == empty
    want = empty or min(target.eval(v) for v in verts) >= 0
    ent = farkas_entails(g, target)
    assert ent.holds == want
    if ent.holds and not ent.vacuous:
        assert _certificate_ok(g, target, ent)


# ---------------------------------------------------------------------------
# floor approximation soundness


def _floor_cases():
    n = Lin.var("n")
    rng = random.Random(11)
    cases = []
    for _ in range(100):
        c = rng.choice([d for d in range(-6, 7) if d])
        a, b = rng.randint(1, 3), rng.randint(-4, 4)
        inner = Floor(n.scale(a) + b, c)
        fl = Floor(Lin.atom(inner), rng.choice([2, 3, -2])) if rng.random() < 0.3 else inner
        lo = rng.randint(-10, 10)
        cases.append((fl, lo))
    return cases


def test_floor_constraints_sound():
    n = Lin.var("n")
    rng = random.Random(5)
    checked = 0
    for fl, lo in _floor_cases():
        at = substitute(ConstraintTriple("f", frozenset([n - lo, Lin.atom(fl) + 1000]), Poly.const(1)))
        floor_constraints(at)
        for _ in range(100):
            nv = rng.randint(lo, lo + 500)
            env = {"n": F(nv)}
            for f in sorted(at.space.floors, key=lambda f: f.depth()):
                arg = at.space.tilde(f.arg).eval(env)
                env[at.space.floors[f]] = F(math.floor(arg / f.div))
            assert all(h.eval(env) >= 0 for h in at.gamma), (str(fl), nv)
            checked += 1
    assert checked == 10_000


# ---------------------------------------------------------------------------
# abstraction soundness on lifted points


@pytest.fixture(scope="module")
def corpus_triples():
    out = []
    for name in ("binary_search", "merge_sort", "karatsuba", "closest_pair", "strassen"):
        cfg = corpus_config(name, skip_sanity=True)
        c = load_cfg(name)
        inv = invariant_map(c)
        ats, _, _ = _pipeline(c, inv, build_template(c, inv, cfg.params), cfg, {})
        out += [(name, at, cfg.r) for at in ats if not at.empty and at.space.defs]
    return out


def test_gamma_sound_on_lifted_points(corpus_triples):
    rng = np.random.default_rng(2024)
    assert len(corpus_triples) > 50
    for name, at, r in corpus_triples:
        cols, got = _lift.sample(at, 10_000, rng)
        assert got == 10_000, (name, at.triple.origin)
        bad = _lift.gamma_violations(at, cols, r)
        assert not bad, (name, at.triple.render(r), bad)


def test_gamma_check_detects_unsound_fact(corpus_triples):
    _, at, r = next(t for t in corpus_triples if t[1].space.logs)
    u = next(iter(at.space.logs.values()))
    broken = AbstractedTriple(at.triple, at.space, at.gamma + [Lin.constant(-1) - Lin.var(u)], at.obligation)
    cols, _ = _lift.sample(broken, 1000, np.random.default_rng(0))
    assert _lift.gamma_violations(broken, cols, r)


# ---------------------------------------------------------------------------
# completeness of the bounded-product deduction system


def _derivation(draw, k: int, size: int):
    if k == 1:
        kinds = ["mem", "mem", "const", "scale", "add"] if size > 0 else ["mem", "const"]
    else:
        kinds = ["mul", "scale", "add"] if size > 0 else ["mul"]
    kind = draw(st.sampled_from(kinds))
    if kind == "mem":
        return ("mem", draw(st.integers(0, 2)))
    if kind == "const":
        return ("const", F(draw(st.integers(0, 5))))
    if kind == "scale":
        return ("scale", F(draw(st.integers(0, 6)), draw(st.integers(1, 3))), _derivation(draw, k, size - 1))
    if kind == "add":
        return ("add", _derivation(draw, k, size - 1), _derivation(draw, k, size - 1))
    return ("mul", _derivation(draw, 1, size - 1), _derivation(draw, k - 1, size - 1))


@st.composite
def derivations(draw):
    pt = {"x": draw(st.integers(-3, 3)), "y": draw(st.integers(-3, 3))}
    gamma = []
    for _ in range(3):
        a, b = draw(st.integers(-2, 2)), draw(st.integers(-2, 2))
        slack = draw(st.integers(0, 3))
        e = Lin.var("x").scale(a) + Lin.var("y").scale(b)
        gamma.append(e - e.eval(pt) + slack)  # nonnegative at pt, so Sat(gamma) is nonempty
    k = draw(st.integers(1, 2))
    return gamma, k, _derivation(draw, k, 3)


def _as_poly(pd) -> Poly:
    out = Poly()
    for mono, c in pd.items():
        term = Poly.const(c)
        for v in mono:
            term = term * Poly.factor(Var(v))
        out = out + term
    return out


@settings(max_examples=200, **SETTINGS)
@given(derivations())
def test_deduction_completeness(inst):
    gamma, k, der = inst
    k_used, dec = deduction_check(gamma, der)
    assert k_used == k and all(len(m) <= k for m in dec)
    ob = _as_poly(decomposition_poly(gamma, dec))
    at = AbstractedTriple(ConstraintTriple("g", frozenset(), ob, "derived"), AbstractionSpace(["x", "y"]), list(gamma), ob)
    lp = assemble_lp([at], k)
    mult = certify_block(lp, 0, {})
    assert mult is not None
    assert replay(lp.blocks[0], {}, mult)


# ---------------------------------------------------------------------------
# exact LP against HiGHS, duality and certificates


@st.composite
def lps(draw):
    nv = draw(st.integers(1, 4))
    names = [f"x{i}" for i in range(nv)]
    free = [draw(st.booleans()) and draw(st.booleans()) for _ in names]
    rows = []
    for _ in range(draw(st.integers(1, 5))):
        coeffs = {v: draw(st.integers(-4, 4)) for v in names}
        rows.append((coeffs, draw(st.sampled_from([LE, LE, GE, EQ])), draw(st.integers(-6, 10))))
    obj = {v: draw(st.integers(-3, 3)) for v in names}
    return names, free, rows, obj, draw(st.booleans())


def _highs(names, free, rows, obj, maximize):
    c = [(-1 if maximize else 1) * obj[v] for v in names]
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for coeffs, sense, rhs in rows:
        row = [coeffs[v] for v in names]
        if sense == LE:
            A_ub.append(row), b_ub.append(rhs)
        elif sense == GE:
            A_ub.append([-a for a in row]), b_ub.append(-rhs)
        else:
            A_eq.append(row), b_eq.append(rhs)
    bounds = [(None, None) if f else (0, None) for f in free]
    return linprog(c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq or None, b_eq=b_eq or None, bounds=bounds, method="highs")


@settings(max_examples=500, **SETTINGS)
@given(lps())
def test_lp_matches_highs(inst):
    names, free, rows, obj, maximize = inst
    p = LPProblem()
    for v, f in zip(names, free):
        p.var(v, free=f)
    for coeffs, sense, rhs in rows:
        p.add(coeffs, sense, rhs)
    p.set_objective(obj, maximize)
    res = optimize(p)
    ref = _highs(names, free, rows, obj, maximize)
    if ref.status in (2, 3):
        # HiGHS may report "infeasible or unbounded"; a zero objective separates the two
        zero = _highs(names, free, rows, {v: 0 for v in names}, False)
        expected = "infeasible" if zero.status == 2 else "unbounded"
    else:
        expected = {0: "optimal"}[ref.status]
    assert res.status == expected
    if res.status == "optimal":
        assert p.feasible_point(res.values)
        assert abs(float(res.objective) - (-ref.fun if maximize else ref.fun)) < 1e-7
        assert res.duals is not None and dual_objective(p, res.duals) == res.objective
    elif res.status == "infeasible":
        assert res.farkas is not None and check_farkas(p, res.farkas)
