"""Handelman-style decompositions: the LP over template variables and monoid multipliers."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .abstraction import AbstractedTriple
from .lpsolve import EQ, GE, LPProblem, lexicographic, optimize
from .symbolic import Lin, Poly

PolyDict = dict  # tuple of sorted variable names -> Fraction
EXACT_LIMIT = 60_000  # rows * columns below which the whole LP is solved exactly


class HandelmanError(Exception):
    pass


def lin_poly(h: Lin) -> PolyDict:
    out: PolyDict = {}
    if h.const:
        out[()] = h.const
    for a, c in h.terms:
        out[(a.name,)] = c
    return out


def poly_mul(a: PolyDict, b: PolyDict) -> PolyDict:
    out: PolyDict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = tuple(sorted(ma + mb))
            out[m] = out.get(m, 0) + ca * cb
    return {m: c for m, c in out.items() if c}


def poly_key(p: PolyDict) -> frozenset:
    return frozenset(p.items())


def obligation_rows(ob: Poly) -> dict[tuple, object]:
    """Monomial (sorted variable names) -> Aff coefficient."""
    out = {}
    for m, a in ob.terms.items():
        out[tuple(sorted(f.name for f in m))] = a
    return out


@dataclass
class MonoidBasis:
    """Products of at most k members of Gamma (index tuples), deduplicated as polynomials."""

    gamma: list[Lin]
    k: int
    products: list[tuple[int, ...]] = field(default_factory=list)
    polys: list[PolyDict] = field(default_factory=list)

    @staticmethod
    def build(gamma: Sequence[Lin], k: int) -> "MonoidBasis":
        b = MonoidBasis(list(gamma), k)
        lins = [lin_poly(h) for h in gamma]
        seen: set[frozenset] = set()
        for size in range(0, k + 1):
            for combo in itertools.combinations_with_replacement(range(len(gamma)), size):
                p: PolyDict = {(): Fraction(1)}
                for i in combo:
                    p = poly_mul(p, lins[i])
                key = poly_key(p)
                if not p or key in seen:
                    continue
                seen.add(key)
                b.products.append(combo)
                b.polys.append(p)
        return b

    def label(self, i: int) -> str:
        combo = self.products[i]
        if not combo:
            return "1"
        return "*".join(f"({self.gamma[j]})" for j in combo)

    def __len__(self) -> int:
        return len(self.polys)


def effective_k(at: AbstractedTriple, k: int) -> int:
    """Affine obligations need only single members (affine Farkas), higher degrees use the full k."""
    deg = at.obligation.degree()
    return 1 if deg <= 1 else k


@dataclass
class Block:
    at: AbstractedTriple
    basis: MonoidBasis
    rows: list[tuple]  # monomials, in row order
    tag: str


@dataclass
class HandelmanLP:
    tvars: list[str]
    blocks: list[Block]
    stages: list[dict[str, Fraction]] = field(default_factory=list)  # lexicographic objectives over aux variables
    aux: dict[str, str] = field(default_factory=dict)  # aux var -> template var it bounds in absolute value

    def lam(self, b: int, i: int) -> str:
        return f"l{b}_{i}"

    def size(self) -> tuple[int, int]:
        rows = sum(len(bl.rows) for bl in self.blocks)
        cols = len(self.tvars) + len(self.aux) + sum(len(bl.basis) for bl in self.blocks)
        return rows, cols

    def to_lp(self, fixed: Optional[Mapping[str, Fraction]] = None, columns: Optional[set[str]] = None) -> LPProblem:
        p = LPProblem()
        if fixed is None:
            for t in self.tvars:
                p.var(t, free=True)
            for a in self.aux:
                p.var(a)
        for bi, bl in enumerate(self.blocks):
            for i in range(len(bl.basis)):
                name = self.lam(bi, i)
                if columns is None or name in columns:
                    p.var(name)
            _block_rows(p, self, bi, fixed, columns)
        if fixed is None:
            for a, t in self.aux.items():
                p.add({a: 1, t: -1}, GE, 0)
                p.add({a: 1, t: 1}, GE, 0)
            if self.stages:
                p.set_objective(self.stages[0])
        return p


def _block_rows(p: LPProblem, lp: HandelmanLP, bi: int, fixed, columns) -> None:
    bl = lp.blocks[bi]
    ob = obligation_rows(bl.at.obligation)
    for m in bl.rows:
        row: dict[str, Fraction] = {}
        for i, poly in enumerate(bl.basis.polys):
            c = poly.get(m)
            if c:
                name = lp.lam(bi, i)
                if columns is None or name in columns:
                    row[name] = c
        a = ob.get(m)
        rhs = Fraction(0)
        if a is not None:
            rhs = a.const
            for t, q in a.coeffs.items():
                if fixed is None:
                    row[t] = row.get(t, 0) - q
                else:
                    rhs += q * fixed[t]
        p.add(row, EQ, rhs)


def assemble_lp(ats: Iterable[AbstractedTriple], k: int, tvars: Sequence[str] = ()) -> HandelmanLP:
    """One block per triple: obligation coefficients equal sum of lambda_h times the basis products."""
    blocks: list[Block] = []
    names = list(tvars)
    for at in ats:
        if at.empty:
            continue
        basis = MonoidBasis.build(at.gamma, effective_k(at, k))
        rows: dict[tuple, None] = {}
        for m in obligation_rows(at.obligation):
            rows.setdefault(m, None)
        for poly in basis.polys:
            for m in poly:
                rows.setdefault(m, None)
        for t in sorted(at.obligation.tvars()):
            if t not in names:
                names.append(t)
        blocks.append(Block(at, basis, sorted(rows, key=lambda m: (len(m), m)), at.triple.origin))
    return HandelmanLP(names, blocks)


def set_leading_objective(lp: HandelmanLP, classes: Sequence[Sequence[str]]) -> None:
    """Lexicographically minimize the absolute coefficient mass of each class of template variables in turn."""
    lp.aux = {}
    lp.stages = []
    for cls in classes:
        stage = {}
        for t in cls:
            a = f"abs_{t}"
            lp.aux[a] = t
            stage[a] = Fraction(1)
        if stage:
            lp.stages.append(stage)


@dataclass
class Certificate:
    assignment: dict[str, Fraction]
    multipliers: list[dict[int, Fraction]]  # per block: basis index -> lambda
    blocks: list[Block]
    method: str = "exact"
    objective: Optional[Fraction] = None

    def to_json(self) -> dict:
        return {
            "assignment": {t: _qs(v) for t, v in self.assignment.items()},
            "triples": [
                {
                    "origin": bl.tag,
                    "triple": str(bl.at.triple),
                    "multipliers": {bl.basis.label(i): _qs(v) for i, v in mult.items()},
                }
                for bl, mult in zip(self.blocks, self.multipliers)
            ],
        }


def _qs(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass
class SolveResult:
    status: str  # feasible | infeasible | unbounded | numerical
    certificate: Optional[Certificate] = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "feasible"


def replay(bl: Block, assignment: Mapping[str, Fraction], mult: Mapping[int, Fraction]) -> bool:
    """Coefficient-exact check that the obligation under the assignment equals sum lambda_h * h."""
    if any(v < 0 for v in mult.values()):
        return False
    total: PolyDict = {}
    for i, lam in mult.items():
        for m, c in bl.basis.polys[i].items():
            total[m] = total.get(m, 0) + lam * c
    for m, a in obligation_rows(bl.at.obligation).items():
        total[m] = total.get(m, 0) - a.eval(assignment)
    return all(c == 0 for c in total.values())


def certify_block(lp: HandelmanLP, bi: int, assignment: Mapping[str, Fraction]) -> Optional[dict[int, Fraction]]:
    """Exact multipliers for one block under a fixed assignment, or None."""
    p = LPProblem()
    bl = lp.blocks[bi]
    for i in range(len(bl.basis)):
        p.var(lp.lam(bi, i))
    _block_rows(p, lp, bi, assignment, None)
    res = optimize(p)
    if not res.ok:
        return None
    mult = {}
    for i in range(len(bl.basis)):
        v = res.values[lp.lam(bi, i)]
        if v:
            mult[i] = v
    return mult


def _certify_all(lp: HandelmanLP, assignment: Mapping[str, Fraction]) -> Optional[list[dict[int, Fraction]]]:
    out = []
    for bi in range(len(lp.blocks)):
        m = certify_block(lp, bi, assignment)
        if m is None:
            return None
        out.append(m)
    return out


def solve(lp: HandelmanLP, exact_limit: int = EXACT_LIMIT) -> SolveResult:
    """Exact simplex for small systems; otherwise a floating-point proposal certified exactly per triple."""
    t0 = time.perf_counter()
    rows, cols = lp.size()
    stats = {"rows": rows, "columns": cols, "triples": len(lp.blocks)}
    if not lp.blocks:
        cert = Certificate({t: Fraction(0) for t in lp.tvars}, [], [], "trivial")
        return SolveResult("feasible", cert, stats)
    if rows * cols <= exact_limit:
        res = _solve_exact(lp, stats)
    else:
        res = _solve_guided(lp, stats)
    stats["seconds"] = time.perf_counter() - t0
    return res


def _solve_exact(lp: HandelmanLP, stats: dict, columns: Optional[set[str]] = None) -> SolveResult:
    p = lp.to_lp(columns=columns)
    res = lexicographic(p, [(st, False) for st in lp.stages]) if lp.stages else optimize(p)
    stats["method"] = "exact"
    if res.status == "infeasible":
        return SolveResult("infeasible", stats=stats)
    if res.status == "unbounded":
        return SolveResult("unbounded", stats=stats)
    assign = {t: res.values[t] for t in lp.tvars}
    mults = []
    for bi, bl in enumerate(lp.blocks):
        mults.append({i: res.values[lp.lam(bi, i)] for i in range(len(bl.basis)) if res.values.get(lp.lam(bi, i))})
    return SolveResult("feasible", Certificate(assign, mults, lp.blocks, "exact", res.objective), stats)


def _solve_guided(lp: HandelmanLP, stats: dict) -> SolveResult:
    import numpy as np
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    p = lp.to_lp()
    idx = {v: j for j, v in enumerate(p.variables)}
    eq_r, eq_c, eq_v, beq = [], [], [], []
    ub_r, ub_c, ub_v, bub = [], [], [], []
    for c in p.constraints:
        if c.sense == EQ:
            i = len(beq)
            for v, a in c.coeffs.items():
                eq_r.append(i), eq_c.append(idx[v]), eq_v.append(float(a))
            beq.append(float(c.rhs))
        else:
            i = len(bub)
            s = -1.0 if c.sense == GE else 1.0
            for v, a in c.coeffs.items():
                ub_r.append(i), ub_c.append(idx[v]), ub_v.append(s * float(a))
            bub.append(s * float(c.rhs))
    n = len(p.variables)
    bounds = [(None, None) if v in p.free else (0, None) for v in p.variables]
    A_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(beq), n)).tocsr()
    stats["method"] = "guided"
    x = None
    for si, stage in enumerate(lp.stages or [{}]):
        cost = np.zeros(n)
        for v, a in stage.items():
            cost[idx[v]] = float(a)
        res = None
        for slack in (1e-7, 1e-5, 1e-3):
            if si and x is not None:
                bub[-1] = pinned * (1 + slack) + slack
            A_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(bub), n)).tocsr() if bub else None
            res = linprog(cost, A_ub=A_ub, b_ub=bub or None, A_eq=A_eq, b_eq=beq, bounds=bounds, method="highs")
            if res.status != 2 or x is None:
                break
        stats["highs_status"] = int(res.status)
        stats["stages_solved"] = si
        if res.status != 0 and x is not None:
            # a later stage failing numerically keeps the earlier optimum
            break
        if res.status == 2:
            return SolveResult("infeasible", stats=stats)
        if res.status == 3:
            return SolveResult("unbounded", stats=stats)
        if res.status != 0:
            return SolveResult("numerical", stats=stats)
        x = res.x
        stats["stages_solved"] = si + 1
        if stage:
            # pin this stage near its optimum before the next one
            i = len(bub)
            for v, a in stage.items():
                ub_r.append(i), ub_c.append(idx[v]), ub_v.append(float(a))
            pinned = res.fun
            bub.append(pinned * (1 + 1e-7) + 1e-7)
    floats = {t: float(x[idx[t]]) for t in lp.tvars}
    for den in (1, 10, 100, 1000, 10**4, 10**5, 10**6, 10**8, 10**10, 10**12):
        assign = {t: Fraction(v).limit_denominator(den) for t, v in floats.items()}
        mults = _certify_all(lp, assign)
        if mults is not None:
            stats["rationalized_denominator"] = den
            obj = _objective_value(lp, assign)
            return SolveResult("feasible", Certificate(assign, mults, lp.blocks, "guided", obj), stats)
    # exact re-solve restricted to the columns the floating solution used
    support = {v for v, j in idx.items() if abs(x[j]) > 1e-9 and v.startswith("l")}
    sub = _solve_exact(lp, stats, columns=support)
    stats["method"] = "guided-support"
    if sub.ok:
        return sub
    return SolveResult("numerical", stats=stats)


def _objective_value(lp: HandelmanLP, assign: Mapping[str, Fraction]) -> Optional[Fraction]:
    if not lp.stages:
        return None
    return sum((abs(assign[lp.aux[a]]) for a in lp.stages[0]), Fraction(0))


# ---------------------------------------------------------------------------
# derivations in the bounded-product deduction system


class DerivationError(Exception):
    pass


def deduction_check(gamma: Sequence[Lin], derivation) -> tuple[int, dict[tuple[int, ...], Fraction]]:
    """Return (k, decomposition) for a derivation tree.

    Nodes: ("mem", i) | ("const", c) | ("scale", c, d) | ("add", d1, d2) | ("mul", d1, d2).
    The decomposition maps sorted tuples of Gamma indices (the empty tuple is the constant 1) to nonnegative
    coefficients; every key has at most k indices.
    """
    if not isinstance(derivation, tuple) or not derivation:
        raise DerivationError(f"malformed derivation {derivation!r}")
    tag = derivation[0]
    if tag == "mem":
        i = derivation[1]
        if not 0 <= i < len(gamma):
            raise DerivationError(f"index {i} not in Gamma")
        return 1, {(i,): Fraction(1)}
    if tag == "const":
        c = Fraction(derivation[1])
        if c < 0:
            raise DerivationError("negative constant")
        return 1, ({(): c} if c else {})
    if tag == "scale":
        c = Fraction(derivation[1])
        if c < 0:
            raise DerivationError("negative scale")
        k, d = deduction_check(gamma, derivation[2])
        return k, {m: c * v for m, v in d.items() if c * v}
    if tag == "add":
        k1, d1 = deduction_check(gamma, derivation[1])
        k2, d2 = deduction_check(gamma, derivation[2])
        if k1 != k2:
            raise DerivationError("sum of derivations with different k")
        out = dict(d1)
        for m, v in d2.items():
            out[m] = out.get(m, 0) + v
        return k1, out
    if tag == "mul":
        k1, d1 = deduction_check(gamma, derivation[1])
        k2, d2 = deduction_check(gamma, derivation[2])
        out: dict[tuple[int, ...], Fraction] = {}
        for m1, v1 in d1.items():
            for m2, v2 in d2.items():
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, 0) + v1 * v2
        return k1 + k2, out
    raise DerivationError(f"unknown rule {tag!r}")


def decomposition_poly(gamma: Sequence[Lin], dec: Mapping[tuple[int, ...], Fraction]) -> PolyDict:
    lins = [lin_poly(h) for h in gamma]
    total: PolyDict = {}
    for m, v in dec.items():
        p: PolyDict = {(): Fraction(1)}
        for i in m:
            p = poly_mul(p, lins[i])
        for mm, c in p.items():
            total[mm] = total.get(mm, 0) + v * c
    return {m: c for m, c in total.items() if c}
