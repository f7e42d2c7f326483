"""Abstraction of floor, log and power terms into fresh variables, with the linear facts relating them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from . import constants as K
from .constraints import ConstraintTriple
from .invariant import Polyhedron, is_empty, minimize
from .lpsolve import EQ, GE, LPProblem, lexicographic
from .symbolic import ONE, Floor, Lin, Log, Monomial, Poly, Pow, Var, mono_mul

W, U, V, VP = "w", "u", "v", "v'"


@dataclass
class AbstractionSpace:
    """Fresh variables and what they stand for.

    ``defs[name] = (kind, expr)`` where expr is the original (floor-bearing) argument; for floors the
    argument is the Floor atom itself.
    """

    scalars: list[str] = field(default_factory=list)
    defs: dict[str, tuple[str, object]] = field(default_factory=dict)
    floors: dict[Floor, str] = field(default_factory=dict)
    logs: dict[Lin, str] = field(default_factory=dict)
    pows: dict[Lin, tuple[str, str]] = field(default_factory=dict)

    @property
    def variables(self) -> list[str]:
        return self.scalars + list(self.defs)

    @property
    def N(self) -> int:
        return len(self.variables)

    def w(self, fl: Floor) -> str:
        if fl not in self.floors:
            name = f"w[{fl}]"
            self.floors[fl] = name
            self.defs[name] = (W, fl)
        return self.floors[fl]

    def tilde(self, e: Lin) -> Lin:
        """e with every floor atom replaced by its w variable (innermost first)."""

        def repl(a):
            if isinstance(a, Var):
                self._scalar(a.name)
                return Lin.atom(a)
            self.tilde(a.arg)
            return Lin.var(self.w(a))

        return e.map_atoms(repl)

    def _scalar(self, name: str) -> None:
        if name not in self.scalars:
            self.scalars.append(name)

    def u(self, arg: Lin) -> str:
        if arg not in self.logs:
            name = f"u[ln({arg})]"
            self.logs[arg] = name
            self.defs[name] = (U, arg)
            self.tilde(arg)
        return self.logs[arg]

    def v(self, arg: Lin) -> tuple[str, str]:
        if arg not in self.pows:
            names = (f"v[({arg})^r]", f"v'[({arg})^(r-1)]")
            self.pows[arg] = names
            self.defs[names[0]] = (V, arg)
            self.defs[names[1]] = (VP, arg)
            self.tilde(arg)
        return self.pows[arg]

    def lift(self, env: dict, r: Optional[Fraction] = None, dps: int = 50) -> dict:
        """Values of all space variables at an integer valuation of the scalars."""
        import mpmath

        out = {k: mpmath.mpf(v) for k, v in env.items()}
        with mpmath.workdps(dps):
            for name, (kind, e) in self.defs.items():
                if kind == W:
                    out[name] = mpmath.mpf(math.floor(e.arg.eval(env) / e.div))
                    continue
                q = Fraction(e.eval(env))
                x = mpmath.mpf(q.numerator) / q.denominator
                if kind == U:
                    out[name] = mpmath.log(x)
                elif kind == V:
                    out[name] = mpmath.power(x, mpmath.mpf(r.numerator) / r.denominator)
                else:
                    out[name] = mpmath.power(x, mpmath.mpf((r - 1).numerator) / (r - 1).denominator)
        return out


@dataclass
class AbstractedTriple:
    triple: ConstraintTriple
    space: AbstractionSpace
    gamma: list[Lin]
    obligation: Poly  # monomials over Var only
    empty: bool = False
    t: dict[str, Fraction] = field(default_factory=dict)  # fresh/argument key -> lower bound
    mutual: dict[tuple[str, str], dict] = field(default_factory=dict)

    def polyhedron(self) -> Polyhedron:
        return Polyhedron(self.gamma)

    def add(self, *hs: Lin) -> None:
        for h in hs:
            if h.is_const():
                continue
            if h not in self.gamma:
                self.gamma.append(h)


# ---------------------------------------------------------------------------


def abstract(t: ConstraintTriple, r: Optional[Fraction] = None, op: str = "none") -> AbstractedTriple:
    """Full abstraction: substitution, floor facts, then log/power facts."""
    at = substitute(t)
    floor_constraints(at)
    if is_empty(at.polyhedron()):
        at.empty = True
        return at
    add_log_exp_constraints(at, r)
    return at


def substitute(t: ConstraintTriple) -> AbstractedTriple:
    sp = AbstractionSpace()
    ob = Poly()
    for m, c in t.obligation.terms.items():
        nm: Monomial = ONE
        for f in m:
            if isinstance(f, Var):
                sp._scalar(f.name)
                nm = mono_mul(nm, (f,))
            elif isinstance(f, Floor):
                sp.tilde(Lin.atom(f))
                nm = mono_mul(nm, (Var(sp.w(f)),))
            elif isinstance(f, Log):
                nm = mono_mul(nm, (Var(sp.u(f.arg)),))
            else:
                nm = mono_mul(nm, (Var(sp.v(f.arg)[0]),))
        ob = ob + Poly({nm: c})
    at = AbstractedTriple(t, sp, [], ob)
    for a in sorted(t.premise, key=lambda x: x.key()):
        at.add(sp.tilde(a))
    return at


def floor_constraints(at: AbstractedTriple) -> None:
    """Defining pair per floor variable, then the t-derived lower (or upper) bound, by nesting depth."""
    sp = at.space
    for fl in sorted(sp.floors, key=lambda f: (f.depth(), f.key())):
        w = Lin.var(sp.floors[fl])
        inner = sp.tilde(fl.arg)
        c = fl.div
        if c >= 1:
            at.add(inner - w.scale(c), w.scale(c) - inner + (c - 1))
        else:
            at.add(w.scale(c) - inner, inner - w.scale(c) - c - 1)
        t = lower_bound_t(at.polyhedron(), inner)
        if t is None:
            continue
        bound = math.floor(t / c)
        at.add(w - bound if c >= 1 else Lin.constant(bound) - w)


def lower_bound_t(gamma: Polyhedron, expr: Lin) -> Optional[Fraction]:
    """Exact minimum of expr over Sat(gamma), None if unbounded below."""
    return minimize(gamma, expr)


def mutual_bounds(gamma: Polyhedron, e: Lin, e2: Lin) -> tuple[Optional[tuple[Fraction, Fraction]], Optional[tuple[Fraction, Fraction]]]:
    """Lexicographic (max r, max b) with e >= r*e2 + b >= r on Sat, and (min r, min b) with e <= r*e2 + b."""
    return _no_smaller(gamma, e, e2), _no_greater(gamma, e, e2)


def _farkas_rows(p: LPProblem, gamma: Polyhedron, target: dict, tag: str) -> None:
    """Encode: target (map var|'1' -> {lp var: coeff} plus constants) is >= 0 on Sat(gamma).

    target[x] is a dict of LP-variable coefficients with the key '' for a constant part.
    Rows: coeff_x(target) = sum_h y_h coeff_x(h) for every x, and const(target) = sum_h y_h const(h) + s.
    """
    ys = [p.var(f"{tag}y{i}") for i in range(len(gamma.members))]
    s = p.var(f"{tag}s")
    names = set(gamma.variables()) | {x for x in target if x != "1"}
    for x in sorted(names):
        row = {y: -h.coeff(Var(x)) for y, h in zip(ys, gamma.members)}
        part = target.get(x, {})
        const = -part.get("", Fraction(0))
        for k, v in part.items():
            if k:
                row[k] = row.get(k, 0) + v
        p.add(row, EQ, const)
    row = {y: -h.const for y, h in zip(ys, gamma.members)}
    row[s] = Fraction(-1)
    part = target.get("1", {})
    for k, v in part.items():
        if k:
            row[k] = row.get(k, 0) + v
    p.add(row, EQ, -part.get("", Fraction(0)))


def _lin_target(e: Lin, scale: Fraction = Fraction(1)) -> dict:
    out: dict = {}
    for a, c in e.terms:
        out.setdefault(a.name, {})[""] = c * scale
    out.setdefault("1", {})[""] = e.const * scale
    return out


def _merge(*ts: dict) -> dict:
    out: dict = {}
    for t in ts:
        for x, part in t.items():
            d = out.setdefault(x, {})
            for k, v in part.items():
                d[k] = d.get(k, 0) + v
    return out


def _times_var(e: Lin, var: str, scale: Fraction = Fraction(1)) -> dict:
    out: dict = {}
    for a, c in e.terms:
        out.setdefault(a.name, {})[var] = c * scale
    out.setdefault("1", {})[var] = e.const * scale
    return out


def _no_smaller(gamma: Polyhedron, e: Lin, e2: Lin) -> Optional[tuple[Fraction, Fraction]]:
    p = LPProblem()
    p.var("r")
    p.var("b", free=True)
    # e - r*e2 - b >= 0
    _farkas_rows(p, gamma, _merge(_lin_target(e), _times_var(e2, "r", Fraction(-1)), {"1": {"b": Fraction(-1)}}), "a")
    # r*e2 + b - r >= 0
    _farkas_rows(p, gamma, _merge(_times_var(e2 - 1, "r"), {"1": {"b": Fraction(1)}}), "c")
    res = lexicographic(p, [({"r": 1}, True), ({"b": 1}, True)])
    if res.status != "optimal":
        return None
    return res.values["r"], res.values["b"]


def _no_greater(gamma: Polyhedron, e: Lin, e2: Lin) -> Optional[tuple[Fraction, Fraction]]:
    p = LPProblem()
    p.var("r")
    p.var("b", free=True)
    # r*e2 + b - e >= 0
    _farkas_rows(p, gamma, _merge(_times_var(e2, "r"), {"1": {"b": Fraction(1)}}, _lin_target(e, Fraction(-1))), "a")
    res = lexicographic(p, [({"r": 1}, False), ({"b": 1}, False)])
    if res.status != "optimal":
        return None
    return res.values["r"], res.values["b"]


def _kappa_lo(t: Fraction) -> Fraction:
    """Lower bound on min over z >= t of z / ln z (t >= 1)."""
    if t <= K.euler().lo:
        return K.euler().lo
    return t / K.ln(t).hi


def add_log_exp_constraints(at: AbstractedTriple, r: Optional[Fraction] = None) -> None:
    sp = at.space
    gamma = at.polyhedron()
    tl: dict[Lin, Fraction] = {}
    for arg, uname in list(sp.logs.items()):
        e = sp.tilde(arg)
        t = lower_bound_t(gamma, e)
        if t is None or t < 1:
            continue
        tl[arg] = t
        at.t[uname] = t
        u = Lin.var(uname)
        at.add(e - u.scale(_kappa_lo(t)), u - K.ln(t).lo)
    tp: dict[Lin, Fraction] = {}
    for arg, (vname, vpname) in list(sp.pows.items()):
        e = sp.tilde(arg)
        t = lower_bound_t(gamma, e)
        if t is None or t < 1:
            continue
        tp[arg] = t
        at.t[vname] = t
        v, vp = Lin.var(vname), Lin.var(vpname)
        at.add(
            v - e.scale(K.power(t, r - 1).lo),
            v - K.power(t, r).lo,
            vp - K.power(t, r - 1).lo,
        )
        if r >= 2:
            at.add(vp - e.scale(K.power(t, r - 2).lo))
        else:
            at.add(e - vp.scale(K.power(t, 2 - r).lo))
    for args, kind in ((tl, U), (tp, V)):
        keys = sorted(args, key=lambda x: x.key())
        for a in keys:
            for b in keys:
                if a == b:
                    continue
                ea, eb = sp.tilde(a), sp.tilde(b)
                lo, hi = mutual_bounds(gamma, ea, eb)
                at.mutual[(str(a), str(b))] = {"no_smaller": lo, "no_greater": hi}
                tb = args[b]
                if kind == U:
                    ua, ub = Lin.var(sp.logs[a]), Lin.var(sp.logs[b])
                    if lo is not None and lo[0] > 0:
                        rs, bs = lo
                        k = -K.ln(rs).lo
                        if bs < 0:
                            beta = bs / rs
                            k += (-beta) / (tb + beta)
                        at.add(ua - ub + k)
                    if hi is not None and hi[0] > 0:
                        rt, bt = hi
                        k = K.ln(rt).hi
                        if bt >= 0:
                            k += bt / rt / tb
                        at.add(ub - ua + k)
                else:
                    (va, _), (vb, vpb) = sp.pows[a], sp.pows[b]
                    va, vb, vpb = Lin.var(va), Lin.var(vb), Lin.var(vpb)
                    if lo is not None and lo[0] > 0 and lo[1] >= 0:
                        rs, bs = lo
                        A = K.power(rs, r).lo
                        at.add(va - (vb + vpb.scale(r * bs / rs)).scale(A))
                    if hi is not None and hi[0] > 0 and hi[1] >= 0:
                        rt, bt = hi
                        B = K.power(rt, r).hi
                        F = Fraction(1) if bt <= 0 else K.power(bt / (rt * tb) + 1, r - 1).hi
                        at.add((vb + vpb.scale(F * r * bt / rt)).scale(B) - va)


def gamma_str(at: AbstractedTriple) -> str:
    return "{" + ", ".join(str(h) for h in at.gamma) + "}"


def dump(ats: Iterable[AbstractedTriple], r=None) -> str:
    lines = []
    for at in ats:
        lines.append(f"[{at.triple.origin}] {at.triple.render(r)}")
        lines.append(f"  obligation: {at.obligation.render()}")
        lines.append(f"  Gamma = {gamma_str(at)}" + ("  (empty, discarded)" if at.empty else ""))
    return "\n".join(lines)
