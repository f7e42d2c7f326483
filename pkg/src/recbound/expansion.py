"""Expanded measure functions at every label, kept in max-of-guarded-sums form."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional

import mpmath

from .cfg import ASSIGN, BRANCH, CALL, DEMONIC, Cfg, significant_labels
from .invariant import InvariantMap, abstract_conj, conj_empty, minimize, replace_floors
from .numeric import DPS, eval_poly
from .symbolic import DNF, FALSE, TRUE, Conj, Poly, _reduce, dnf_and, dnf_eval, dnf_not, dnf_or, dnf_str, dnf_subst
from .template import TemplateMap

GuardedSum = tuple  # tuple of (DNF guard, Poly)
PiecewiseMax = tuple  # nonempty tuple of GuardedSum
ExpansionMap = dict  # (function, label) -> PiecewiseMax


# ---------------------------------------------------------------------------
# guard simplification


@lru_cache(maxsize=200000)
def simplify_conj(c: Conj) -> Optional[Conj]:
    """None when the conjunction is empty; otherwise drop atoms implied by the others, floor-bearing ones first.

    Redundancy is decided in the real relaxation so that the abstracted premise polyhedron never grows.
    """
    if conj_empty(c):
        return None
    atoms = sorted(c, key=lambda a: (-a.floor_depth(), a.key()))
    kept = list(atoms)
    for a in atoms:
        rest = [x for x in kept if x != a]
        lo = minimize(abstract_conj(rest, [a]), replace_floors(a))
        if lo is not None and lo >= 0:
            kept.remove(a)
    return frozenset(kept)


def simplify_dnf(d: DNF) -> DNF:
    out = []
    for c in d:
        s = simplify_conj(c)
        if s is not None:
            out.append(s)
    return _reduce(out)


def _finish_sum(pieces) -> GuardedSum:
    """Drop empty guards and merge pieces sharing an expression."""
    by_expr: dict[Poly, DNF] = {}
    for g, h in pieces:
        g = simplify_dnf(g)
        if not g:
            continue
        by_expr[h] = dnf_or(by_expr[h], g) if h in by_expr else g
    return tuple((g, h) for h, g in by_expr.items())


def _finish_max(branches) -> PiecewiseMax:
    out: dict[frozenset, GuardedSum] = {}
    for b in branches:
        key = frozenset(b)
        out.setdefault(key, b)
    return tuple(out.values())


# ---------------------------------------------------------------------------
# algebra on piecewise maxima


def pm_const(q) -> PiecewiseMax:
    return (((TRUE, Poly.const(q)),),)


def pm_plus_const(p: PiecewiseMax, q) -> PiecewiseMax:
    k = Poly.const(q)
    return tuple(tuple((g, h + k) for g, h in b) for b in p)


def pm_add(p: PiecewiseMax, q: PiecewiseMax) -> PiecewiseMax:
    """max{f_i} + max{g_j} = max{f_i + g_j}, each sum crossed piecewise."""
    out = []
    for a in p:
        for b in q:
            out.append(_finish_sum((dnf_and(ga, gb), ha + hb) for ga, ha in a for gb, hb in b))
    return _finish_max(out)


def pm_branch(phi: DNF, p: PiecewiseMax, q: PiecewiseMax) -> PiecewiseMax:
    """1_phi * p + 1_{not phi} * q with indicators distributed into the maxima."""
    nphi = dnf_not(phi)
    out = []
    for a in p:
        for b in q:
            pieces = [(dnf_and(phi, g), h) for g, h in a] + [(dnf_and(nphi, g), h) for g, h in b]
            out.append(_finish_sum(pieces))
    return _finish_max(out)


def pm_max(p: PiecewiseMax, q: PiecewiseMax) -> PiecewiseMax:
    return _finish_max(list(p) + list(q))


def pm_subst(p: PiecewiseMax, sigma: Mapping) -> PiecewiseMax:
    return _finish_max(_finish_sum((dnf_subst(g, sigma), h.subst(sigma)) for g, h in b) for b in p)


def wrap(inv: DNF, eta: Poly) -> PiecewiseMax:
    """1_I * eta + 1_{not I} * 0."""
    pieces = [(inv, eta)]
    neg = dnf_not(inv)
    if neg != FALSE:
        pieces.append((neg, Poly()))
    return (tuple(pieces),)


def normalize(p: PiecewiseMax) -> PiecewiseMax:
    return _finish_max(_finish_sum(b) for b in p)


# ---------------------------------------------------------------------------
# the expansion itself


class Expansion:
    """Expanded functions per label plus the one-step bodies used by constraint generation.

    ``values[(f, l)]`` is the expanded function at l. ``steps[(f, l)]`` is the right-hand side
    of the step condition at l without the unit cost, defined for every non-terminal label.
    """

    def __init__(self, c: Cfg, tm: TemplateMap, inv: InvariantMap):
        self.cfg = c
        self.tm = tm
        self.inv = inv
        self.sig = {(f, l) for f, ls in significant_labels(c).items() for l in ls}
        self.values: ExpansionMap = {}
        self.steps: ExpansionMap = {}

    def entry_wrapped(self, fname: str) -> PiecewiseMax:
        key = (fname, self.cfg[fname].l_in)
        return self.value(*key)

    def value(self, fname: str, lab: int) -> PiecewiseMax:
        key = (fname, lab)
        if key in self.values:
            return self.values[key]
        fc = self.cfg[fname]
        if lab == fc.l_out:
            v = pm_const(0)
        elif key in self.sig:
            v = wrap(self.inv[key], self.tm[key])
        else:
            v = pm_plus_const(self.step(fname, lab), 1)
        self.values[key] = v
        return v

    def step(self, fname: str, lab: int) -> PiecewiseMax:
        key = (fname, lab)
        if key in self.steps:
            return self.steps[key]
        fc = self.cfg[fname]
        kind = fc.kinds[lab]
        trans = fc.out[lab]
        if kind == ASSIGN:
            t = trans[0]
            v = pm_subst(self.value(fname, t.dst), t.action.sigma())
        elif kind == BRANCH:
            pos = next(t for t in trans if not t.action.negated)
            neg = next(t for t in trans if t.action.negated)
            v = pm_branch(pos.action.dnf, self.value(fname, pos.dst), self.value(fname, neg.dst))
        elif kind == CALL:
            t = trans[0]
            callee = pm_subst(self.entry_wrapped(t.action.callee), t.action.sigma())
            v = pm_add(callee, self.value(fname, t.dst))
        elif kind == DEMONIC:
            v = pm_max(self.value(fname, trans[0].dst), self.value(fname, trans[1].dst))
        else:  # pragma: no cover
            raise ValueError(f"unknown label kind {kind}")
        self.steps[key] = v
        return v

    def run(self) -> "Expansion":
        for name, fc in self.cfg.functions.items():
            for lab in fc.labels:
                self.value(name, lab)
                if lab != fc.l_out:
                    self.step(name, lab)
        return self


def expand(c: Cfg, tm: TemplateMap, inv: InvariantMap) -> Expansion:
    return Expansion(c, tm, inv).run()


# ---------------------------------------------------------------------------
# evaluation and rendering


def pm_eval(p: PiecewiseMax, env: Mapping[str, int], assign: Mapping[str, Fraction], r=None) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        best = None
        for b in p:
            total = mpmath.mpf(0)
            for g, h in b:
                if dnf_eval(g, env):
                    total += eval_poly(h, env, assign, r)
            best = total if best is None or total > best else best
        return best


def evaluate_direct(
    c: Cfg, tm: TemplateMap, inv: InvariantMap, fname: str, lab: int, env: Mapping[str, int], assign, r=None
) -> mpmath.mpf:
    """Reference evaluation of the expanded function by recursion on concrete values."""
    from .semantics import env_of, successors, valuation

    sig = {(f, l) for f, ls in significant_labels(c).items() for l in ls}

    def go(f: str, l: int, vals: tuple) -> mpmath.mpf:
        fc = c[f]
        if l == fc.l_out:
            return mpmath.mpf(0)
        e = env_of(c, f, vals)
        if (f, l) in sig:
            if dnf_eval(inv[(f, l)], e):
                return eval_poly(tm[(f, l)], e, assign, r)
            return mpmath.mpf(0)
        kind, succ = successors(c, (f, l, vals))
        if kind == CALL:
            (g, gl, gvals), (l2, v2) = succ
            return 1 + go(g, gl, gvals) + go(f, l2, v2)
        if kind == DEMONIC:
            return 1 + max(go(f, l2, v2) for l2, v2 in succ)
        l2, v2 = succ[0]
        return 1 + go(f, l2, v2)

    with mpmath.workdps(DPS):
        return go(fname, lab, valuation(c, fname, env))


def gs_str(b: GuardedSum, r=None) -> str:
    if not b:
        return "0"
    return " + ".join(f"1[{dnf_str(g)}]*({h.render(r)})" for g, h in b)


def pm_str(p: PiecewiseMax, r=None) -> str:
    if len(p) == 1:
        return gs_str(p[0], r)
    return "max{" + ", ".join(gs_str(b, r) for b in p) + "}"


def dump(ex: Expansion, r=None) -> str:
    lines = []
    for name, fc in ex.cfg.functions.items():
        for lab in fc.labels:
            lines.append(f"{name}@{lab}: {pm_str(ex.values[(name, lab)], r)}")
    return "\n".join(lines)
