"""High-precision numeric evaluation of symbolic expressions (used by checks, never by synthesis)."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping, Optional

import mpmath

from .symbolic import Aff, Floor, Lin, Log, Poly, Var

DPS = 50


def mpf(q) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        if isinstance(q, Fraction):
            return mpmath.mpf(q.numerator) / q.denominator
        return mpmath.mpf(q)


def eval_factor(f, env: Mapping[str, int], r: Optional[Fraction]) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        if isinstance(f, Var):
            return mpmath.mpf(env[f.name])
        if isinstance(f, Floor):
            return mpmath.mpf(math.floor(f.arg.eval(env) / f.div))
        x = f.arg.eval(env)
        if isinstance(f, Log):
            if x <= 0:
                raise ValueError(f"ln of non-positive value {x}")
            return mpmath.log(mpf(x))
        if x < 0:
            raise ValueError(f"power of negative value {x}")
        return mpmath.power(mpf(x), mpf(r))


def eval_poly(p: Poly, env: Mapping[str, int], assign: Mapping[str, Fraction], r: Optional[Fraction] = None) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        total = mpmath.mpf(0)
        for m, c in p.terms.items():
            coef = c.eval(assign) if c.coeffs else c.const
            if not coef:
                continue
            val = mpf(coef)
            for f in m:
                val *= eval_factor(f, env, r)
            total += val
        return total


def exact_factor(f, env: Mapping[str, int], r: Optional[Fraction]) -> Optional[Fraction]:
    """Exact rational value of a factor, or None when it is irrational (or not known to be rational)."""
    if isinstance(f, Var):
        return Fraction(env[f.name])
    if isinstance(f, Floor):
        return Fraction(math.floor(f.arg.eval(env) / f.div))
    x = f.arg.eval(env)
    if isinstance(f, Log):
        return Fraction(0) if x == 1 else None
    if x in (0, 1):
        return Fraction(x)
    if r is not None and Fraction(r).denominator == 1:
        return Fraction(x) ** int(r)
    return None


def split_exact(p: Poly, env: Mapping[str, int], assign: Mapping[str, Fraction], r: Optional[Fraction] = None):
    """(exact part, remaining polynomial): rational-valued monomials summed exactly, the others left symbolic."""
    exact = Fraction(0)
    rest = Poly()
    for m, c in p.terms.items():
        coef = c.eval(assign) if c.coeffs else c.const
        if not coef:
            continue
        vals = [exact_factor(f, env, r) for f in m]
        if all(v is not None for v in vals):
            term = Fraction(coef)
            for v in vals:
                term *= v
            exact += term
        else:
            rest = rest + Poly({m: Aff({}, coef)})
    return exact, rest


def dominates(p: Poly, env: Mapping[str, int], assign: Mapping[str, Fraction], value, r: Optional[Fraction] = None) -> bool:
    """p(env) >= value, decided exactly when p(env) is rational and at DPS digits otherwise."""
    exact, rest = split_exact(p, env, assign, r)
    if not rest.terms:
        return exact >= value
    with mpmath.workdps(DPS):
        return mpf(exact - Fraction(value)) + eval_poly(rest, env, {}, r) >= 0


def eval_lin_real(e: Lin, env: Mapping[str, object]) -> mpmath.mpf:
    """Evaluate with real-valued variables (no floor atoms expected)."""
    with mpmath.workdps(DPS):
        total = mpf(e.const)
        for a, c in e.terms:
            total += mpf(c) * env[a.name]
        return total


def aff_value(a: Aff, assign: Mapping[str, Fraction]) -> Fraction:
    return a.eval(assign)
