"""Rational enclosures of the irrational constants that appear in abstraction inequalities."""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import iv

GRID = 10**5  # enclosure endpoints lie on a 1e-5 grid, so widths stay below 1e-4
_active = [GRID]


@contextmanager
def precision(grid: int):
    """Temporarily snap enclosures to a 1/grid lattice (used when verifying irrational coefficients)."""
    _active.append(int(grid))
    try:
        yield
    finally:
        _active.pop()


def active_grid() -> int:
    return _active[-1]


@dataclass(frozen=True)
class DirectedConstant:
    """lo <= value <= hi with exact rational endpoints."""

    desc: str
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        return f"{self.desc} in [{float(self.lo):.6g}, {float(self.hi):.6g}]"


@contextmanager
def _ivdps(dps: int):
    old = iv.dps
    iv.dps = dps
    try:
        yield
    finally:
        iv.dps = old


def _grid_enclose(desc: str, a, b, grid: int) -> DirectedConstant:
    """Snap an interval [a, b] (mpf endpoints) outward to the grid."""
    with mpmath.workdps(60):
        lo = Fraction(math.floor(mpmath.mpf(a) * grid), grid)
        hi = Fraction(math.ceil(mpmath.mpf(b) * grid), grid)
    return DirectedConstant(desc, lo, hi)


def _exact(desc: str, q: Fraction) -> DirectedConstant:
    return DirectedConstant(desc, q, q)


def euler() -> DirectedConstant:
    return _euler(active_grid())


def ln(t: Fraction) -> DirectedConstant:
    return _ln(Fraction(t), active_grid())


def power(t: Fraction, q: Fraction) -> DirectedConstant:
    """t^q for rational t > 0 and rational q, checked by exact integer powers."""
    return _power(Fraction(t), Fraction(q), active_grid())


@lru_cache(maxsize=None)
def _euler(grid: int) -> DirectedConstant:
    with _ivdps(60):
        x = iv.e
        return _grid_enclose("e", x.a, x.b, grid)


@lru_cache(maxsize=None)
def _ln(t: Fraction, grid: int) -> DirectedConstant:
    if t <= 0:
        raise ValueError("ln of non-positive constant")
    if t == 1:
        return _exact("ln 1", Fraction(0))
    with _ivdps(60):
        x = iv.log(iv.mpf(t.numerator) / t.denominator)
        return _grid_enclose(f"ln({t})", x.a, x.b, grid)


@lru_cache(maxsize=None)
def _power(t: Fraction, q: Fraction, grid: int) -> DirectedConstant:
    if t <= 0:
        raise ValueError("power of non-positive constant")
    if q == 0 or t == 1:
        return _exact(f"{t}^{q}", Fraction(1))
    if q.denominator == 1:
        return _exact(f"{t}^{q}", t ** int(q))
    with _ivdps(60):
        x = iv.exp(iv.mpf(q.numerator) / q.denominator * iv.log(iv.mpf(t.numerator) / t.denominator))
        dc = _grid_enclose(f"{t}^{q}", x.a, x.b, grid)
    # exact confirmation: lo^den <= t^num <= hi^den
    p, d = q.numerator, q.denominator
    target = t**p
    lo, hi = dc.lo, dc.hi
    while lo > 0 and lo**d > target:
        lo -= Fraction(1, grid)
    while hi**d < target:
        hi += Fraction(1, grid)
    return DirectedConstant(dc.desc, max(lo, Fraction(0)), hi)


def lower(dc: DirectedConstant) -> Fraction:
    return dc.lo


def upper(dc: DirectedConstant) -> Fraction:
    return dc.hi
