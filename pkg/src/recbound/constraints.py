"""Constraint triples (f, premise, obligation) from non-negativity and the step conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .cfg import Cfg, significant_labels
from .expansion import Expansion, simplify_conj
from .invariant import InvariantMap, abstract_conj, minimize, replace_floors
from .symbolic import ONE, Conj, Lin, Log, Poly, Pow, conj_str, dnf_and


@dataclass(frozen=True)
class ConstraintTriple:
    """For all valuations satisfying every premise atom (e >= 0), obligation >= 0."""

    function: str
    premise: Conj
    obligation: Poly
    origin: str = ""  # e.g. "f@1 nonneg" or "f@1 step"

    def __str__(self) -> str:
        return f"({self.function}, {conj_str(self.premise)}, {self.obligation.render()})"

    def render(self, r=None) -> str:
        return f"({self.function}, {conj_str(self.premise)}, {self.obligation.render(r)})"


def generate_triples(c: Cfg, inv: InvariantMap, ex: Expansion) -> list[ConstraintTriple]:
    """Non-negativity per invariant disjunct, then eta - h - 1 over every branch, piece and disjunct."""
    out: list[ConstraintTriple] = []
    one = Poly.const(1)
    for fname, labs in significant_labels(c).items():
        for lab in labs:
            key = (fname, lab)
            eta = ex.tm[key]
            tag = f"{fname}@{lab}"
            for cj in inv[key]:
                out.append(ConstraintTriple(fname, cj, eta, f"{tag} nonneg"))
            for branch in ex.steps[key]:
                for guard, h in branch:
                    ob = eta - h - one
                    for cj in dnf_and(inv[key], guard):
                        out.append(ConstraintTriple(fname, cj, ob, f"{tag} step"))
    return out


def _template_free_entailed(t: ConstraintTriple) -> bool:
    ob = t.obligation
    if ob.has_tvars():
        return False
    if ob.is_zero():
        return True
    if ob.degree() > 1 or any(isinstance(f, (Log, Pow)) for f in ob.factors()):
        return False
    lin = Lin.constant(ob.terms[ONE].const) if ONE in ob.terms else Lin.constant(0)
    for m, a in ob.terms.items():
        if m != ONE:
            lin = lin + Lin.atom(m[0]).scale(a.const)
    gamma = abstract_conj(t.premise, [lin])
    lo = minimize(gamma, replace_floors(lin))
    return lo is not None and lo >= 0


def prune_unsat(ts: Iterable[ConstraintTriple]) -> list[ConstraintTriple]:
    """Drop triples with empty premises or template-free entailed obligations; simplify and dedupe premises."""
    seen: set[tuple] = set()
    out: list[ConstraintTriple] = []
    for t in ts:
        prem: Optional[Conj] = simplify_conj(t.premise)
        if prem is None:
            continue
        t = ConstraintTriple(t.function, prem, t.obligation, t.origin)
        if _template_free_entailed(t):
            continue
        key = (t.function, t.premise, t.obligation)
        if key in seen:
            continue
        seen.add(key)
        out.append(t)
    return out


def dump(ts: Iterable[ConstraintTriple], r=None) -> str:
    return "\n".join(f"[{t.origin}] {t.render(r)}" for t in ts)
