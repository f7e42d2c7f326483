"""Exact rational linear programming: two-phase tableau simplex with Bland's rule.

Variables are nonnegative unless listed in ``free``. Every result carries exact
rationals: optimal points with dual multipliers, or a Farkas certificate of
infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from gmpy2 import mpq

LE, GE, EQ = "<=", ">=", "=="


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _f(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class Constraint:
    coeffs: dict[str, Fraction]
    sense: str
    rhs: Fraction
    name: Optional[str] = None

    def lhs(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((c * point.get(v, Fraction(0)) for v, c in self.coeffs.items()), Fraction(0))

    def holds(self, point: Mapping[str, Fraction]) -> bool:
        lhs = self.lhs(point)
        if self.sense == LE:
            return lhs <= self.rhs
        if self.sense == GE:
            return lhs >= self.rhs
        return lhs == self.rhs


@dataclass
class LPProblem:
    variables: list[str] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: Optional[dict[str, Fraction]] = None
    maximize: bool = False
    free: set[str] = field(default_factory=set)

    def var(self, name: str, free: bool = False) -> str:
        if name not in self._index():
            self.variables.append(name)
            self._idx[name] = len(self.variables) - 1
        if free:
            self.free.add(name)
        return name

    def _index(self) -> dict[str, int]:
        idx = getattr(self, "_idx", None)
        if idx is None or len(idx) != len(self.variables):
            self._idx = {v: i for i, v in enumerate(self.variables)}
        return self._idx

    def add(self, coeffs: Mapping[str, object], sense: str, rhs=0, name: Optional[str] = None) -> Constraint:
        idx = self._index()
        for v in coeffs:
            if v not in idx:
                raise KeyError(f"undeclared LP variable {v!r}")
        c = Constraint({v: Fraction(x) for v, x in coeffs.items() if x}, sense, Fraction(rhs), name)
        self.constraints.append(c)
        return c

    def set_objective(self, coeffs: Mapping[str, object], maximize: bool = False) -> None:
        self.objective = {v: Fraction(x) for v, x in coeffs.items() if x}
        self.maximize = maximize

    def copy(self) -> "LPProblem":
        return LPProblem(
            list(self.variables),
            list(self.constraints),
            None if self.objective is None else dict(self.objective),
            self.maximize,
            set(self.free),
        )

    def feasible_point(self, point: Mapping[str, Fraction]) -> bool:
        for v in self.variables:
            if v not in self.free and point.get(v, 0) < 0:
                return False
        return all(c.holds(point) for c in self.constraints)


@dataclass
class LPResult:
    status: str  # optimal | feasible | infeasible | unbounded
    values: dict[str, Fraction] = field(default_factory=dict)
    objective: Optional[Fraction] = None
    duals: Optional[list[Fraction]] = None
    farkas: Optional[list[Fraction]] = None
    stage: Optional[int] = None
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


class _Tableau:
    """Dense tableau over [structural | slack | artificial] columns, rows already sign-normalized."""

    def __init__(self, rows: list[list[mpq]], rhs: list[mpq], ncols_real: int):
        m = len(rows)
        self.m = m
        self.nreal = ncols_real
        self.ncols = ncols_real + m
        self.T = []
        for i, row in enumerate(rows):
            art = [mpq(0)] * m
            art[i] = mpq(1)
            self.T.append(row + art)
        self.b = list(rhs)
        self.basis = [ncols_real + i for i in range(m)]
        self.pivots = 0

    def pivot(self, r: int, col: int, obj_rows: list[list[mpq]], obj_vals: list[list[mpq]]) -> None:
        T = self.T
        prow = T[r]
        p = prow[col]
        if p != 1:
            inv = 1 / p
            prow = [x * inv if x else x for x in prow]
            T[r] = prow
            self.b[r] = self.b[r] * inv
        nz = [j for j, x in enumerate(prow) if x]
        br = self.b[r]
        for i in range(self.m):
            if i == r:
                continue
            row = T[i]
            f = row[col]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
                self.b[i] -= f * br
        for orow, oval in zip(obj_rows, obj_vals):
            f = orow[col]
            if f:
                for j in nz:
                    orow[j] -= f * prow[j]
                oval[0] -= f * br
        self.basis[r] = col
        self.pivots += 1

    def run(self, cost: list[mpq], allowed: list[bool], extra_rows: Sequence[list[mpq]] = ()) -> str:
        """Minimize cost over current basis with Bland's rule. Returns 'optimal' or 'unbounded'."""
        red = list(cost)
        val = [mpq(0)]
        for i, bj in enumerate(self.basis):
            cb = cost[bj]
            if cb:
                row = self.T[i]
                for j, x in enumerate(row):
                    if x:
                        red[j] -= cb * x
                val[0] -= cb * self.b[i]
        self.red, self.val = red, val
        while True:
            col = -1
            for j in range(self.ncols):
                if allowed[j] and red[j] < 0:
                    col = j
                    break
            if col < 0:
                return "optimal"
            r = -1
            best = None
            for i in range(self.m):
                a = self.T[i][col]
                if a > 0:
                    ratio = self.b[i] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[r]):
                        best, r = ratio, i
            if r < 0:
                return "unbounded"
            self.pivot(r, col, [red], [val])

    def binv_row_combo(self, weights: list[mpq]) -> list[mpq]:
        """y = weights_B^T B^{-1}, read from the artificial columns."""
        y = [mpq(0)] * self.m
        for i, bj in enumerate(self.basis):
            w = weights[bj]
            if w:
                row = self.T[i]
                for k in range(self.m):
                    x = row[self.nreal + k]
                    if x:
                        y[k] += w * x
        return y


def optimize(p: LPProblem) -> LPResult:
    """Solve exactly. Without an objective the result status is 'feasible'."""
    cols: list[tuple[str, int]] = []  # (variable, sign)
    for v in p.variables:
        cols.append((v, 1))
        if v in p.free:
            cols.append((v, -1))
    col_index: dict[str, list[tuple[int, int]]] = {}
    for j, (v, s) in enumerate(cols):
        col_index.setdefault(v, []).append((j, s))
    n_struct = len(cols)
    ineq = [i for i, c in enumerate(p.constraints) if c.sense != EQ]
    slack_col = {i: n_struct + k for k, i in enumerate(ineq)}
    nreal = n_struct + len(ineq)
    rows: list[list[mpq]] = []
    rhs: list[mpq] = []
    signs: list[int] = []
    for i, c in enumerate(p.constraints):
        row = [mpq(0)] * nreal
        for v, a in c.coeffs.items():
            for j, s in col_index[v]:
                row[j] = _q(a) * s
        if c.sense == LE:
            row[slack_col[i]] = mpq(1)
        elif c.sense == GE:
            row[slack_col[i]] = mpq(-1)
        b = _q(c.rhs)
        sg = 1
        if b < 0:
            row = [-x for x in row]
            b = -b
            sg = -1
        rows.append(row)
        rhs.append(b)
        signs.append(sg)
    m = len(rows)
    tab = _Tableau(rows, rhs, nreal)
    ncols = tab.ncols
    # phase 1
    cost1 = [mpq(0)] * nreal + [mpq(1)] * m
    tab.run(cost1, [True] * ncols)
    if -tab.val[0] > 0:
        y = tab.binv_row_combo(cost1)
        mu = [_f(y[i]) * signs[i] for i in range(m)]
        cert = []
        for i, c in enumerate(p.constraints):
            cert.append(-mu[i] if c.sense == LE else mu[i])
        return LPResult("infeasible", farkas=cert, pivots=tab.pivots)
    # drive zero-level artificials out of the basis where possible
    for i in range(m):
        if tab.basis[i] >= nreal:
            row = tab.T[i]
            for j in range(nreal):
                if row[j]:
                    tab.pivot(i, j, [], [])
                    break
    allowed = [True] * nreal + [False] * m
    cost2 = [mpq(0)] * ncols
    obj = p.objective or {}
    osign = -1 if p.maximize else 1
    for v, a in obj.items():
        for j, s in col_index[v]:
            cost2[j] = _q(a) * s * osign
    status = tab.run(cost2, allowed)
    values = _extract(p, tab, cols)
    if status == "unbounded":
        return LPResult("unbounded", values=values, pivots=tab.pivots)
    y = tab.binv_row_combo(cost2)
    duals = [_f(y[i]) * signs[i] * osign for i in range(m)]
    objective = None
    if p.objective is not None:
        objective = sum((a * values[v] for v, a in p.objective.items()), Fraction(0))
    return LPResult("optimal" if p.objective is not None else "feasible", values, objective, duals, pivots=tab.pivots)


def _extract(p: LPProblem, tab: _Tableau, cols: list[tuple[str, int]]) -> dict[str, Fraction]:
    vals = {v: Fraction(0) for v in p.variables}
    for i, bj in enumerate(tab.basis):
        if bj < len(cols):
            v, s = cols[bj]
            vals[v] += _f(tab.b[i]) * s
    return vals


def check_farkas(p: LPProblem, cert: Sequence[Fraction]) -> bool:
    """Verify an infeasibility certificate: a combination of constraints g_i >= 0 that is negative everywhere.

    Each inequality is read as g_i = b_i - a_i.x (<=) or a_i.x - b_i (>=) and must get a nonnegative
    multiplier; equalities g_i = a_i.x - b_i take any sign. The combination must have zero coefficients on
    free variables, nonpositive coefficients on nonnegative variables, and a negative constant.
    """
    if len(cert) != len(p.constraints):
        return False
    coef = {v: Fraction(0) for v in p.variables}
    const = Fraction(0)
    for mult, c in zip(cert, p.constraints):
        if c.sense != EQ and mult < 0:
            return False
        s = -1 if c.sense == LE else 1
        for v, a in c.coeffs.items():
            coef[v] += mult * s * a
        const -= mult * s * c.rhs
    for v, a in coef.items():
        if (v in p.free and a != 0) or a > 0:
            return False
    return const < 0


def dual_objective(p: LPProblem, duals: Sequence[Fraction]) -> Fraction:
    return sum((y * c.rhs for y, c in zip(duals, p.constraints)), Fraction(0))


def lexicographic(p: LPProblem, objectives: Iterable[tuple[Mapping[str, object], bool]]) -> LPResult:
    """Optimize (objective, maximize) pairs in order, pinning each optimum before the next."""
    q = p.copy()
    res = LPResult("feasible")
    for stage, (obj, maximize) in enumerate(objectives):
        q.set_objective(obj, maximize)
        res = optimize(q)
        res.stage = stage
        if res.status != "optimal":
            return res
        q.add(dict(obj), EQ, res.objective)
    return res


def feasible(p: LPProblem) -> LPResult:
    q = p.copy()
    q.objective = None
    return optimize(q)
