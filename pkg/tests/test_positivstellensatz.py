from fractions import Fraction

import pytest

from recbound.abstraction import abstract
from recbound.constraints import ConstraintTriple, generate_triples, prune_unsat
from recbound.expansion import expand
from recbound.positivstellensatz import (
    DerivationError,
    HandelmanLP,
    MonoidBasis,
    assemble_lp,
    certify_block,
    decomposition_poly,
    deduction_check,
    effective_k,
    lin_poly,
    poly_mul,
    replay,
    set_leading_objective,
    solve,
)
from recbound.symbolic import Lin, Poly, Var
from recbound.template import LOG, TemplateParams, build_template, growth_classes

F = Fraction
x, y = Lin.var("x"), Lin.var("y")


@pytest.fixture
def bs_ats(bs_cfg, bs_inv):
    tm = build_template(bs_cfg, bs_inv, TemplateParams(1, LOG))
    ts = prune_unsat(generate_triples(bs_cfg, bs_inv, expand(bs_cfg, tm, bs_inv)))
    return tm, [abstract(t, None, LOG) for t in ts]


def test_nonneg_block_matches_members(bs_ats):
    _, ats = bs_ats
    lp = assemble_lp(ats[:1], 1, ["c1", "c2", "c3"])
    assign = {"c1": F(0), "c2": F(2), "c3": F(2)}
    mult = certify_block(lp, 0, assign)
    assert mult is not None and replay(lp.blocks[0], assign, mult)
    labels = {lp.blocks[0].basis.label(i): v for i, v in mult.items()}
    assert labels == {"1": 2, "(u[ln(n)])": 2}


def test_negative_coefficient_rejected(bs_ats):
    _, ats = bs_ats
    lp = assemble_lp(ats[:1], 1, ["c1", "c2", "c3"])
    assert certify_block(lp, 0, {"c1": F(0), "c2": F(0), "c3": F(-1)}) is None


def test_full_binary_search_lp(bs_ats):
    tm, ats = bs_ats
    lp = assemble_lp(ats, 1, tm.tvars)
    set_leading_objective(lp, growth_classes(tm[("f", 1)]))
    res = solve(lp)
    assert res.ok
    cert = res.certificate
    assert cert.assignment["c1"] == 0
    for bl, mult in zip(cert.blocks, cert.multipliers):
        assert replay(bl, cert.assignment, mult)


def test_obligation_that_is_a_member():
    t = ConstraintTriple("f", frozenset([x - 1]), Poly.factor(Var("x")) - Poly.const(1))
    lp = assemble_lp([abstract(t)], 1)
    mult = certify_block(lp, 0, {})
    assert mult is not None and replay(lp.blocks[0], {}, mult)


def test_product_needs_degree_two():
    # x*y >= 0 from x >= 0, y >= 0 needs a product of two members
    t = ConstraintTriple("f", frozenset([x, y]), Poly.factor(Var("x")) * Poly.factor(Var("y")))
    at = abstract(t)
    assert effective_k(at, 1) == 1
    assert certify_block(assemble_lp([at], 1), 0, {}) is None
    lp2 = assemble_lp([at], 2)
    mult = certify_block(lp2, 0, {})
    assert mult is not None and replay(lp2.blocks[0], {}, mult)


def test_empty_system_is_trivially_feasible():
    res = solve(HandelmanLP(["c1", "c2"], []))
    assert res.ok and res.certificate.assignment == {"c1": 0, "c2": 0}


def test_monoid_basis_dedupes():
    b = MonoidBasis.build([x, x], 2)
    assert len(b) == 3  # 1, x, x^2


def test_deduction_examples():
    gamma = [x, y - 1]
    k, dec = deduction_check(gamma, ("add", ("mul", ("mem", 0), ("mem", 1)), ("mul", ("const", 2), ("mem", 0))))
    assert k == 2
    assert dec == {(0, 1): 1, (0,): 2}
    poly = decomposition_poly(gamma, dec)
    want = poly_mul(lin_poly(x), lin_poly(y - 1))
    want[("x",)] = want.get(("x",), 0) + 2
    assert poly == {m: c for m, c in want.items() if c}


@pytest.mark.parametrize(
    "bad",
    [
        ("mem", 5),
        ("const", -1),
        ("scale", -2, ("mem", 0)),
        ("add", ("mem", 0), ("mul", ("mem", 0), ("mem", 1))),
        ("frob",),
        (),
    ],
)
def test_deduction_rejects(bad):
    with pytest.raises(DerivationError):
        deduction_check([x, y], bad)
