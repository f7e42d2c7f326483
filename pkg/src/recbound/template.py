"""Templates at significant labels: all products of at most d base terms, with log or power extensions."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .cfg import Cfg, significant_labels
from .frontend import _Parser, to_lin, tokenize
from .invariant import InvariantMap, Polyhedron, entails
from .symbolic import ONE, DNF, Factor, Lin, Log, Monomial, Poly, Pow, Var, mono_mul, mono_str

LOG, EXP, NONE = "log", "exp", "none"


class TemplateError(Exception):
    pass


@dataclass(frozen=True)
class TemplateParams:
    d: int
    op: str = NONE
    r: Optional[Fraction] = None

    def __post_init__(self):
        if self.d < 1:
            raise TemplateError("degree d must be at least 1")
        if self.op not in (LOG, EXP, NONE):
            raise TemplateError(f"unknown op {self.op!r}")
        if self.op == EXP and (self.r is None or self.r <= 1):
            raise TemplateError("exponent r must exceed 1 when op = exp")


@dataclass
class TemplateMap:
    params: TemplateParams
    templates: dict[tuple[str, int], Poly]
    tvars: list[str]
    variables: dict[tuple[str, int], list[str]]

    def __getitem__(self, key: tuple[str, int]) -> Poly:
        return self.templates[key]

    def extension_count(self) -> int:
        return sum(
            1 for p in self.templates.values() for m in p.terms if any(isinstance(f, (Log, Pow)) for f in m)
        )


def disjunct_polyhedra(d: DNF) -> list[Polyhedron]:
    return [Polyhedron(c) for c in d]


def admissible(term: Factor, disjuncts: list[Polyhedron]) -> bool:
    """Well-definedness: the argument of a log/power term is at least 1 in every invariant disjunct."""
    if not isinstance(term, (Log, Pow)):
        return True
    need = term.arg - 1
    return all(entails(g, need) for g in disjuncts)


def base_terms(vars_: list[str], params: tuple[str, ...], disjuncts: list[Polyhedron], op: str) -> list[Factor]:
    terms: list[Factor] = [Var(v) for v in vars_]
    if op == NONE:
        return terms
    wrap = Log if op == LOG else Pow
    cands: list[Lin] = [Lin.var(v) for v in vars_]
    cands += [Lin.var(x) - Lin.var(y) + 1 for x, y in itertools.permutations(params, 2)]
    seen: set[Lin] = set()
    for arg in cands:
        if arg in seen:
            continue
        seen.add(arg)
        t = wrap(arg)
        if admissible(t, disjuncts):
            terms.append(t)
    return terms


def monomials(terms: list[Factor], d: int) -> list[Monomial]:
    out: list[Monomial] = []
    seen: set[Monomial] = set()
    for k in range(1, d + 1):
        for combo in itertools.combinations_with_replacement(range(len(terms)), k):
            m: Monomial = ONE
            for i in combo:
                m = mono_mul(m, (terms[i],))
            if m not in seen:
                seen.add(m)
                out.append(m)
    return out


def build_template(
    c: Cfg,
    inv: InvariantMap,
    params: TemplateParams,
    restrict: Optional[Mapping[tuple[str, int], list[Poly]]] = None,
) -> TemplateMap:
    """Fresh template variable per admissible monomial (plus a constant) at every significant label.

    Entry templates range over the parameters; loop-head templates over all variables of the function.
    A restriction map replaces the full template at a label by the given shape polynomials.
    """
    sig = significant_labels(c)
    templates: dict[tuple[str, int], Poly] = {}
    tvars: list[str] = []
    vmap: dict[tuple[str, int], list[str]] = {}
    counter = itertools.count(1)
    for f in c.program.functions:
        fc = c[f.name]
        for lab in sig[f.name]:
            key = (f.name, lab)
            vars_ = list(fc.params) if lab == fc.l_in else list(fc.variables)
            vmap[key] = vars_
            poly = Poly()
            if restrict is not None and key in restrict:
                for shape in restrict[key]:
                    t = f"c{next(counter)}"
                    tvars.append(t)
                    poly = poly + shape.times_aff(Poly.template([(ONE, t)]).terms[ONE])
            else:
                disj = disjunct_polyhedra(inv[key])
                terms = base_terms(vars_, fc.params, disj, params.op)
                for m in monomials(terms, params.d) + [ONE]:
                    t = f"c{next(counter)}"
                    tvars.append(t)
                    poly = poly + Poly.template([(m, t)])
            templates[key] = poly
    tm = TemplateMap(params, templates, tvars, vmap)
    if params.op != NONE and tm.extension_count() == 0:
        raise TemplateError("template-empty: the well-definedness restriction removed every extension monomial")
    return tm


# ---------------------------------------------------------------------------
# restricted-template shapes, e.g.  "(j - i + 1)*ln(j - i + 1)"

_FACTOR_RE = re.compile(r"\s*(ln|pow)\s*\(")


def parse_shape(text: str) -> Poly:
    """Parse a product of factors: integer, variable, (linear expr), ln(linear expr), pow(linear expr)."""
    poly = Poly.const(1)
    for part in _split_top(text, "*"):
        part = part.strip()
        m = _FACTOR_RE.match(part)
        if m and part.endswith(")"):
            arg = _parse_lin(part[m.end() : -1])
            poly = poly * Poly.factor(Log(arg) if m.group(1) == "ln" else Pow(arg))
        else:
            poly = poly * Poly.from_lin(_parse_lin(part))
    return poly


def _parse_lin(text: str) -> Lin:
    p = _Parser(tokenize(text))
    e = p.expr()
    if p.peek().kind != "eof":
        raise TemplateError(f"cannot parse template factor {text!r}")
    return to_lin(e)


def _split_top(text: str, sep: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def parse_restriction(spec: Mapping[str, Iterable[str]], c: Cfg) -> dict[tuple[str, int], list[Poly]]:
    """Map "function@label" (or "function" for its entry) to lists of shape strings."""
    out: dict[tuple[str, int], list[Poly]] = {}
    for key, shapes in spec.items():
        if "@" in key:
            fname, lab = key.split("@")
            k = (fname, int(lab))
        else:
            k = (key, c[key].l_in)
        out[k] = [parse_shape(s) for s in shapes]
    return out


def growth(m: Monomial, r: Optional[Fraction] = None) -> tuple[Fraction, int]:
    """Asymptotic class of a monomial: (polynomial exponent, number of log factors)."""
    exp, logs = Fraction(0), 0
    for f in m:
        if isinstance(f, Log):
            logs += 1
        elif isinstance(f, Pow):
            exp += r if r is not None else 1
        else:
            exp += 1
    return exp, logs


def growth_classes(p: Poly, r: Optional[Fraction] = None) -> list[list[str]]:
    """Template variables of p grouped by the growth class of their monomial, fastest-growing first."""
    groups: dict[tuple[Fraction, int], list[str]] = {}
    for m, a in p.terms.items():
        groups.setdefault(growth(m, r), []).extend(sorted(a.coeffs))
    return [groups[g] for g in sorted(groups, reverse=True)]


def render_template(p: Poly, r: Optional[Fraction] = None) -> str:
    return p.render(r)


__all__ = [
    "LOG",
    "EXP",
    "NONE",
    "TemplateParams",
    "TemplateMap",
    "TemplateError",
    "admissible",
    "build_template",
    "monomials",
    "base_terms",
    "parse_shape",
    "parse_restriction",
    "mono_str",
    "growth",
    "growth_classes",
]
