"""Vectorized lifting of integer valuations into abstraction spaces, for sampling-based soundness checks."""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np

from recbound.abstraction import U, V, VP, W, AbstractedTriple
from recbound.invariant import Polyhedron, abstract_conj, minimize, replace_floors
from recbound.symbolic import Floor, Lin, Var

SPAN = 40


def _lcm_den(e: Lin) -> int:
    d = e.const.denominator
    for _, c in e.terms:
        d = d * c.denominator // math.gcd(d, c.denominator)
    return d


def eval_int(e: Lin, cols: dict[str, np.ndarray], n: int) -> tuple[np.ndarray, int]:
    """(numerator array, denominator) of e with floors evaluated exactly."""
    den = _lcm_den(e)
    out = np.full(n, int(e.const * den), dtype=np.int64)
    for a, c in e.terms:
        k = int(c * den)
        if isinstance(a, Var):
            out += k * cols[a.name]
        else:
            out += k * eval_floor(a, cols, n)
    return out, den


def eval_floor(fl: Floor, cols, n) -> np.ndarray:
    num, den = eval_int(fl.arg, cols, n)
    return np.floor_divide(num, den * fl.div) if fl.div > 0 else np.floor_divide(-num, den * -fl.div)


def premise_holds(atoms, cols, n) -> np.ndarray:
    ok = np.ones(n, dtype=bool)
    for a in atoms:
        num, _ = eval_int(a, cols, n)
        ok &= num >= 0
    return ok


def box(premise, scalars) -> dict[str, tuple[int, int]]:
    g = abstract_conj(list(premise))
    out = {}
    for v in scalars:
        x = Lin.var(v)
        lo = minimize(g, x)
        hi = minimize(g, -x)
        lo_i = math.ceil(lo) if lo is not None else -SPAN // 2
        hi_i = math.floor(-hi) if hi is not None else lo_i + SPAN
        out[v] = (lo_i, min(hi_i, lo_i + SPAN))
    return out


def sample(at: AbstractedTriple, want: int, rng: np.random.Generator, batch: int = 200_000, rounds: int = 20):
    """Integer valuations of the scalars satisfying the premise, by rejection inside a bounding box."""
    scalars = at.space.scalars
    b = box(at.triple.premise, scalars)
    got: dict[str, list[np.ndarray]] = {v: [] for v in scalars}
    total = 0
    for _ in range(rounds):
        cols = {v: rng.integers(lo, hi + 1, size=batch) for v, (lo, hi) in b.items()}
        ok = premise_holds(at.triple.premise, cols, batch)
        for v in scalars:
            got[v].append(cols[v][ok])
        total += int(ok.sum())
        if total >= want:
            break
    return {v: np.concatenate(got[v])[:want] for v in scalars}, min(total, want)


def lift(at: AbstractedTriple, cols: dict[str, np.ndarray], r) -> dict[str, np.ndarray]:
    n = len(next(iter(cols.values()))) if cols else 0
    vals = {v: cols[v].astype(float) for v in cols}
    ints = dict(cols)
    for name, (kind, e) in at.space.defs.items():
        if kind == W:
            ints[name] = eval_floor(e, cols, n)
            vals[name] = ints[name].astype(float)
    for name, (kind, e) in at.space.defs.items():
        if kind == W:
            continue
        num, den = eval_int(e, cols, n)
        x = num / den
        if kind == U:
            vals[name] = np.log(x)
        elif kind == V:
            vals[name] = np.power(x, float(r))
        else:
            vals[name] = np.power(x, float(r - 1))
    return vals


def gamma_violations(
    at: AbstractedTriple, cols: dict[str, np.ndarray], r, slack: float = 1e-20, screen: float = 1e-6
) -> list[tuple[str, dict, str]]:
    """Gamma members negative beyond slack at some lifted point.

    Members over integer-valued variables are checked exactly. For the others a float pass screens all
    points and any value within a relative margin of zero is re-evaluated from the integer valuation at
    50 digits, so the verdict is that of the high-precision check.
    """
    n = len(next(iter(cols.values()))) if cols else 0
    ints = dict(cols)
    for name, (kind, e) in at.space.defs.items():
        if kind == W:
            ints[name] = eval_floor(e, cols, n)
    vals = lift(at, cols, r)
    lifted: dict[int, dict] = {}
    bad = []
    with mpmath.workdps(50):
        tol = mpmath.mpf(slack)
        for h in at.gamma:
            if all(a.name in ints for a, _ in h.terms):
                num, _ = eval_int(h, ints, n)
                if (num < 0).any():
                    i = int(np.argmin(num))
                    bad.append((str(h), {v: int(cols[v][i]) for v in at.space.scalars}, "exact"))
                continue
            total = np.full(n, float(h.const))
            scale = np.full(n, abs(float(h.const)) + 1.0)
            for a, c in h.terms:
                term = float(c) * vals[a.name]
                total += term
                scale += np.abs(term)
            for i in np.nonzero(total < screen * scale)[0]:
                if i not in lifted:
                    env = {v: int(cols[v][i]) for v in at.space.scalars}
                    lifted[i] = at.space.lift(env, r, dps=50)
                exact = h.eval(lifted[i])
                if exact < -tol:
                    bad.append((str(h), {v: int(cols[v][i]) for v in at.space.scalars}, mpmath.nstr(exact, 10)))
                    break
    return bad
