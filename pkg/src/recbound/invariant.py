"""Invariants in DNF, polyhedra, and Farkas-based entailment."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional

from .cfg import Cfg, Guard, Update, significant_labels
from .frontend import to_dnf
from .lpsolve import EQ, GE, LPProblem, optimize
from .symbolic import DNF, TRUE, Conj, Floor, Lin, Var, dnf_and, dnf_or

InvariantMap = dict  # (function, label) -> DNF


class Polyhedron:
    """Sat(Gamma) = {x : h(x) >= 0 for all h}; members are degree-1 Lin over Var atoms."""

    __slots__ = ("members",)

    def __init__(self, members: Iterable[Lin] = ()):
        uniq: dict[Lin, None] = {}
        for h in members:
            if any(not isinstance(a, Var) for a in h.atoms()):
                raise ValueError(f"polyhedron member {h} contains a floor atom")
            uniq.setdefault(h, None)
        self.members: tuple[Lin, ...] = tuple(uniq)

    def variables(self) -> list[str]:
        out: dict[str, None] = {}
        for h in self.members:
            for a in h.atoms():
                out.setdefault(a.name, None)
        return list(out)

    def add(self, *hs: Lin) -> "Polyhedron":
        return Polyhedron(self.members + hs)

    def contains(self, point: Mapping[str, Fraction]) -> bool:
        return all(h.eval(point) >= 0 for h in self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polyhedron) and set(self.members) == set(other.members)

    def __hash__(self) -> int:
        return hash(frozenset(self.members))

    def __str__(self) -> str:
        return "{" + ", ".join(str(h) for h in self.members) + "}"


def _sat_lp(gamma: Polyhedron, extra_vars: Iterable[str] = ()) -> LPProblem:
    p = LPProblem()
    for v in list(gamma.variables()) + [v for v in extra_vars if v not in gamma.variables()]:
        p.var(v, free=True)
    for h in gamma:
        p.add({a.name: c for a, c in h.terms}, GE, -h.const)
    return p


@lru_cache(maxsize=200000)
def is_empty(gamma: Polyhedron) -> bool:
    if not gamma.members:
        return False
    return optimize(_sat_lp(gamma)).status == "infeasible"


def minimize(gamma: Polyhedron, expr: Lin) -> Optional[Fraction]:
    """Exact minimum of expr over Sat(gamma); None if unbounded below (or Sat empty)."""
    if expr.is_const():
        return expr.const
    vs = [a.name for a in expr.atoms()]
    p = _sat_lp(gamma, vs)
    p.set_objective({a.name: c for a, c in expr.terms})
    r = optimize(p)
    if r.status != "optimal":
        return None
    return r.objective + expr.const


@dataclass
class Entailment:
    holds: bool
    multipliers: Optional[dict[int, Fraction]] = None  # index into gamma.members
    slack: Optional[Fraction] = None
    vacuous: bool = False


def farkas_entails(gamma: Polyhedron, target: Lin) -> Entailment:
    """Decide Sat(gamma) |= target >= 0; on success give y >= 0 with target = slack + sum y_h h."""
    if is_empty(gamma):
        return Entailment(True, vacuous=True)
    p = LPProblem()
    ys = [p.var(f"y{k}") for k in range(len(gamma.members))]
    p.var("slack")
    names = set(gamma.variables()) | {a.name for a in target.atoms()}
    for v in sorted(names):
        row = {y: h.coeff(Var(v)) for y, h in zip(ys, gamma.members)}
        p.add(row, EQ, target.coeff(Var(v)))
    row = {y: h.const for y, h in zip(ys, gamma.members)}
    row["slack"] = Fraction(1)
    p.add(row, EQ, target.const)
    r = optimize(p)
    if not r.ok:
        return Entailment(False)
    mult = {k: r.values[y] for k, y in enumerate(ys) if r.values[y]}
    return Entailment(True, mult, r.values["slack"])


def entails(gamma: Polyhedron, target: Lin) -> bool:
    return _entails_cached(gamma, target)


@lru_cache(maxsize=200000)
def _entails_cached(gamma: Polyhedron, target: Lin) -> bool:
    if is_empty(gamma):
        return True
    m = minimize(gamma, target)
    return m is not None and m >= 0


# ---------------------------------------------------------------------------
# floor-bearing conjunctions


def floor_var(fl: Floor) -> str:
    return f"[{fl}]"


def abstract_conj(atoms: Iterable[Lin], extra: Iterable[Lin] = ()) -> Polyhedron:
    """Replace floor atoms by fresh variables with their two defining inequalities (no t-bound).

    Floors occurring in ``extra`` get their defining inequalities too, without the expressions becoming members.
    """
    atoms = list(atoms)
    floors: set[Floor] = set()
    for a in atoms + list(extra):
        floors |= a.floors()
    members = [_replace_floors(a) for a in atoms]
    for fl in sorted(floors, key=lambda f: (f.depth(), f.key())):
        w = Lin.var(floor_var(fl))
        inner = _replace_floors(fl.arg)
        members += floor_pair(inner, w, fl.div)
    return Polyhedron(members)


def replace_floors(e: Lin) -> Lin:
    return _replace_floors(e)


def floor_pair(inner: Lin, w: Lin, c: int) -> list[Lin]:
    if c >= 1:
        return [inner - w.scale(c), w.scale(c) - inner + (c - 1)]
    return [w.scale(c) - inner, inner - w.scale(c) - c - 1]


def _replace_floors(e: Lin) -> Lin:
    return e.map_atoms(lambda a: Lin.atom(a) if isinstance(a, Var) else Lin.var(floor_var(a)))


@lru_cache(maxsize=200000)
def conj_empty(c: Conj) -> bool:
    return is_empty(abstract_conj(c))


# ---------------------------------------------------------------------------
# invariant maps


def invariant_map(c: Cfg) -> InvariantMap:
    """DNF invariants at significant labels from annotations (missing annotation means true)."""
    out: InvariantMap = {}
    sig = significant_labels(c)
    for f in c.program.functions:
        anns = f.invariants()
        for lab in sig[f.name]:
            out[(f.name, lab)] = to_dnf(anns.get(lab))
    return out


def propagate(c: Cfg, inv: InvariantMap) -> InvariantMap:
    """Extend to every non-terminal label by conjoining traversed guards and dropping clobbered atoms."""
    out = dict(inv)
    for name, fc in c.functions.items():
        sig = {lab for (f, lab) in inv if f == name}
        preds: dict[int, list] = {}
        for t in fc.transitions():
            if t.dst not in sig and t.dst != fc.l_out:
                preds.setdefault(t.dst, []).append(t)
        order: list[int] = []
        state: dict[int, int] = {}

        def visit(lab: int) -> None:
            if state.get(lab) == 2 or lab in sig:
                return
            state[lab] = 1
            for t in preds.get(lab, []):
                if state.get(t.src) != 1:
                    visit(t.src)
            state[lab] = 2
            order.append(lab)

        for lab in fc.kinds:
            visit(lab)
        for lab in order:
            acc: DNF = ()
            for t in preds.get(lab, []):
                src = out.get((name, t.src), TRUE)
                if isinstance(t.action, Guard):
                    src = dnf_and(src, t.action.dnf)
                elif isinstance(t.action, Update) and t.action.target is not None:
                    tgt = t.action.target
                    src = tuple(frozenset(a for a in cj if tgt not in a.variables()) for cj in src)
                acc = dnf_or(acc, src)
            out[(name, lab)] = acc if preds.get(lab) else TRUE
    return out
