"""Symbolic core: linear expressions with floors, template polynomials, DNF guards.

Everything here is immutable after construction and hashable, so it can be used
as dictionary keys and cached freely.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

Rat = Fraction


def as_rat(x: Union[int, Fraction, str]) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def fmt_rat(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# atoms and factors


class Var:
    """A scalar program variable (or an abstraction variable)."""

    __slots__ = ("name", "_key")

    def __init__(self, name: str):
        self.name = name
        self._key = (0, name)

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Var) and other.name == self.name

    def __hash__(self) -> int:
        return hash(("V", self.name))

    def __repr__(self) -> str:
        return f"Var({self.name!r})"

    def __str__(self) -> str:
        return self.name


class Floor:
    """floor(arg / div) with a nonzero integer divisor."""

    __slots__ = ("arg", "div", "_key", "_hash")

    def __init__(self, arg: "Lin", div: int):
        if div == 0:
            raise ZeroDivisionError("floor divisor must be nonzero")
        self.arg = arg
        self.div = div
        self._key = (1, div, arg.key())
        self._hash = hash(("F", arg, div))

    def key(self) -> tuple:
        return self._key

    def depth(self) -> int:
        return 1 + self.arg.floor_depth()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Floor) and other.div == self.div and other.arg == self.arg

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Floor({self.arg!r}, {self.div})"

    def __str__(self) -> str:
        return f"floor(({self.arg})/{self.div})"


class Log:
    """Extension factor ln(arg)."""

    __slots__ = ("arg", "_key", "_hash")

    def __init__(self, arg: "Lin"):
        self.arg = arg
        self._key = (2, arg.key())
        self._hash = hash(("L", arg))

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Log) and other.arg == self.arg

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Log({self.arg!r})"

    def __str__(self) -> str:
        return f"ln({self.arg})"


class Pow:
    """Extension factor arg^r; the exponent r is fixed per analysis run."""

    __slots__ = ("arg", "_key", "_hash")

    def __init__(self, arg: "Lin"):
        self.arg = arg
        self._key = (3, arg.key())
        self._hash = hash(("P", arg))

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Pow) and other.arg == self.arg

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Pow({self.arg!r})"

    def __str__(self) -> str:
        return f"({self.arg})^r"


Atom = Union[Var, Floor]
Factor = Union[Var, Floor, Log, Pow]


# ---------------------------------------------------------------------------
# linear expressions over atoms


class Lin:
    """Affine expression sum(coeff * atom) + const over Var/Floor atoms."""

    __slots__ = ("terms", "const", "_hash", "_key")

    def __init__(self, terms: Mapping[Atom, Fraction] | Iterable[tuple[Atom, Fraction]] = (), const=0):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Atom, Fraction] = {}
        for a, c in items:
            if c:
                acc[a] = acc.get(a, Fraction(0)) + as_rat(c)
        self.terms = tuple(sorted(((a, c) for a, c in acc.items() if c), key=lambda t: t[0].key()))
        self.const = as_rat(const)
        self._hash = None
        self._key = None

    # constructors
    @staticmethod
    def var(name: str) -> "Lin":
        return Lin(((Var(name), Fraction(1)),))

    @staticmethod
    def atom(a: Atom) -> "Lin":
        return Lin(((a, Fraction(1)),))

    @staticmethod
    def constant(c) -> "Lin":
        return Lin((), c)

    # structure
    def key(self) -> tuple:
        if self._key is None:
            self._key = (tuple((a.key(), c) for a, c in self.terms), self.const)
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lin) and self.const == other.const and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.terms, self.const))
        return self._hash

    def is_const(self) -> bool:
        return not self.terms

    def coeff(self, a: Atom) -> Fraction:
        for b, c in self.terms:
            if b == a:
                return c
        return Fraction(0)

    def atoms(self) -> list[Atom]:
        return [a for a, _ in self.terms]

    def floors(self) -> set[Floor]:
        """All floor atoms, including nested ones."""
        out: set[Floor] = set()
        for a, _ in self.terms:
            if isinstance(a, Floor):
                out.add(a)
                out |= a.arg.floors()
        return out

    def variables(self) -> set[str]:
        out: set[str] = set()
        for a, _ in self.terms:
            if isinstance(a, Var):
                out.add(a.name)
            else:
                out |= a.arg.variables()
        return out

    def floor_depth(self) -> int:
        return max((a.depth() for a, _ in self.terms if isinstance(a, Floor)), default=0)

    def is_integral(self) -> bool:
        return self.const.denominator == 1 and all(c.denominator == 1 for _, c in self.terms)

    # arithmetic
    def __add__(self, other: "Lin | int | Fraction") -> "Lin":
        if not isinstance(other, Lin):
            return Lin(self.terms, self.const + as_rat(other))
        return Lin(self.terms + other.terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "Lin":
        return Lin(((a, -c) for a, c in self.terms), -self.const)

    def __sub__(self, other: "Lin | int | Fraction") -> "Lin":
        if not isinstance(other, Lin):
            return Lin(self.terms, self.const - as_rat(other))
        return self + (-other)

    def __rsub__(self, other: "int | Fraction") -> "Lin":
        return (-self) + other

    def scale(self, q) -> "Lin":
        q = as_rat(q)
        return Lin(((a, c * q) for a, c in self.terms), self.const * q)

    def __mul__(self, q) -> "Lin":
        return self.scale(q)

    __rmul__ = __mul__

    # substitution and evaluation
    def subst(self, sigma: Mapping[str, "Lin"]) -> "Lin":
        pieces: list[tuple[Atom, Fraction]] = []
        const = self.const
        for a, c in self.terms:
            if isinstance(a, Var):
                rep = sigma.get(a.name)
                if rep is None:
                    pieces.append((a, c))
                    continue
            else:
                rep = floor_div(a.arg.subst(sigma), a.div)
            pieces.extend((b, c * d) for b, d in rep.terms)
            const += c * rep.const
        return Lin(pieces, const)

    def map_atoms(self, fn) -> "Lin":
        """Replace every top-level atom a by fn(a) (a Lin)."""
        pieces: list[tuple[Atom, Fraction]] = []
        const = self.const
        for a, c in self.terms:
            rep = fn(a)
            pieces.extend((b, c * d) for b, d in rep.terms)
            const += c * rep.const
        return Lin(pieces, const)

    def eval(self, env: Mapping[str, int | Fraction]) -> Fraction:
        total = self.const
        for a, c in self.terms:
            if isinstance(a, Var):
                total += c * env[a.name]
            else:
                total += c * math.floor(a.arg.eval(env) / a.div)
        return total

    def __repr__(self) -> str:
        return f"Lin({self})"

    def __str__(self) -> str:
        parts: list[str] = []
        for a, c in self.terms:
            s = str(a)
            if c == 1:
                parts.append(("+ ", s))
            elif c == -1:
                parts.append(("- ", s))
            elif c > 0:
                parts.append(("+ ", f"{fmt_rat(c)}*{s}"))
            else:
                parts.append(("- ", f"{fmt_rat(-c)}*{s}"))
        if self.const or not parts:
            parts.append(("+ " if self.const >= 0 else "- ", fmt_rat(abs(self.const))))
        head_sign, head = parts[0]
        text = ("-" if head_sign == "- " else "") + head
        for sign, body in parts[1:]:
            text += f" {sign}{body}"
        return text


def floor_div(arg: Lin, c: int) -> Lin:
    """Canonical Lin for floor(arg / c), simplifying exactly where possible."""
    if c == 0:
        raise ZeroDivisionError("floor divisor must be nonzero")
    if arg.is_const():
        return Lin.constant(math.floor(arg.const / c))
    if not arg.is_integral():
        return Lin.atom(Floor(arg, c))
    if c < 0:
        arg, c = -arg, -c
    if c == 1:
        return arg
    q, rem = divmod(int(arg.const), c)
    body = Lin(arg.terms, 0)
    g = c
    for _, k in body.terms:
        g = math.gcd(g, int(k))
    if g > 1:
        body = body.scale(Fraction(1, g))
        rem //= g
        c //= g
    if c == 1:
        return body + rem + q
    return Lin.atom(Floor(body + rem, c)) + q


# ---------------------------------------------------------------------------
# affine forms over template variables


class Aff:
    """Affine form sum(q * tvar) + const over template (unknown) variables."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[str, Fraction] | None = None, const=0):
        self.coeffs = {k: as_rat(v) for k, v in (coeffs or {}).items() if v}
        self.const = as_rat(const)
        self._hash = None

    @staticmethod
    def tvar(name: str) -> "Aff":
        return Aff({name: Fraction(1)})

    def is_zero(self) -> bool:
        return not self.coeffs and not self.const

    def is_const(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "Aff") -> "Aff":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return Aff(out, self.const + other.const)

    def __neg__(self) -> "Aff":
        return Aff({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other: "Aff") -> "Aff":
        return self + (-other)

    def scale(self, q) -> "Aff":
        q = as_rat(q)
        if not q:
            return Aff()
        return Aff({k: v * q for k, v in self.coeffs.items()}, self.const * q)

    def eval(self, assign: Mapping[str, Fraction]) -> Fraction:
        return self.const + sum((v * assign[k] for k, v in self.coeffs.items()), Fraction(0))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Aff) and self.const == other.const and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((frozenset(self.coeffs.items()), self.const))
        return self._hash

    def __str__(self) -> str:
        parts = [f"{fmt_rat(v)}*{k}" if v != 1 else k for k, v in sorted(self.coeffs.items())]
        if self.const or not parts:
            parts.append(fmt_rat(self.const))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Aff({self})"


# ---------------------------------------------------------------------------
# polynomials whose monomials are products of factors

Monomial = tuple  # sorted tuple of Factor, repetitions allowed
ONE: Monomial = ()


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(a + b, key=lambda f: f.key()))


def mono_str(m: Monomial, r: Fraction | None = None) -> str:
    if not m:
        return "1"
    out = []
    for f in m:
        if isinstance(f, Pow):
            exp = fmt_rat(r) if r is not None else "r"
            base = str(f.arg)
            out.append(f"({base})^{_dec(r) if r is not None else exp}")
        elif isinstance(f, Var):
            out.append(f.name)
        else:
            out.append(str(f))
    return "*".join(out)


def _dec(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    f = float(q)
    return repr(f) if Fraction(repr(f)) == q else fmt_rat(q)


class Poly:
    """Sum of Aff-coefficient monomials; at most one side of a product may carry template variables."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Aff] | None = None):
        self.terms: dict[Monomial, Aff] = {m: c for m, c in (terms or {}).items() if not c.is_zero()}

    @staticmethod
    def const(q) -> "Poly":
        return Poly({ONE: Aff(const=q)})

    @staticmethod
    def from_lin(e: Lin) -> "Poly":
        terms: dict[Monomial, Aff] = {}
        for a, c in e.terms:
            terms[(a,)] = Aff(const=c)
        if e.const:
            terms[ONE] = Aff(const=e.const)
        return Poly(terms)

    @staticmethod
    def factor(f: Factor) -> "Poly":
        return Poly({(f,): Aff(const=1)})

    @staticmethod
    def template(pairs: Iterable[tuple[Monomial, str]]) -> "Poly":
        return Poly({m: Aff.tvar(t) for m, t in pairs})

    def is_zero(self) -> bool:
        return not self.terms

    def has_tvars(self) -> bool:
        return any(c.coeffs for c in self.terms.values())

    def tvars(self) -> set[str]:
        out: set[str] = set()
        for c in self.terms.values():
            out |= set(c.coeffs)
        return out

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out[m] + c if m in out else c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, q) -> "Poly":
        return Poly({m: c.scale(q) for m, c in self.terms.items()})

    def times_aff(self, a: Aff) -> "Poly":
        """Multiply a constant-coefficient polynomial by an affine form."""
        out: dict[Monomial, Aff] = {}
        for m, c in self.terms.items():
            if c.coeffs:
                raise ValueError("product would be nonlinear in template variables")
            out[m] = a.scale(c.const)
        return Poly(out)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Monomial, Aff] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                if c1.coeffs and c2.coeffs:
                    raise ValueError("product would be nonlinear in template variables")
                c = c2.scale(c1.const) if not c1.coeffs else c1.scale(c2.const)
                m = mono_mul(m1, m2)
                out[m] = out[m] + c if m in out else c
        return Poly(out)

    def factors(self) -> set[Factor]:
        return {f for m in self.terms for f in m}

    def subst(self, sigma: Mapping[str, Lin]) -> "Poly":
        if not sigma:
            return self
        cache: dict[Factor, Poly] = {}
        out = Poly()
        for m, c in self.terms.items():
            prod = Poly.const(1)
            for f in m:
                if f not in cache:
                    cache[f] = subst_factor(f, sigma)
                prod = prod * cache[f]
                if prod.is_zero():
                    break
            out = out + prod.times_aff(c)
        return out

    def eval_coeffs(self, assign: Mapping[str, Fraction]) -> "Poly":
        return Poly({m: Aff(const=c.eval(assign)) for m, c in self.terms.items()})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def sorted_terms(self) -> list[tuple[Monomial, Aff]]:
        return sorted(self.terms.items(), key=lambda t: (-len(t[0]), [f.key() for f in t[0]]))

    def render(self, r: Fraction | None = None) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            cs = str(c)
            if c.is_const():
                if not m:
                    parts.append(cs)
                elif c.const == 1:
                    parts.append(mono_str(m, r))
                else:
                    parts.append(f"{cs}*{mono_str(m, r)}")
            else:
                parts.append(f"({cs})" + ("" if not m else f"*{mono_str(m, r)}"))
        return " + ".join(parts)

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"Poly({self})"


def subst_factor(f: Factor, sigma: Mapping[str, Lin]) -> Poly:
    if isinstance(f, Var):
        rep = sigma.get(f.name)
        return Poly.factor(f) if rep is None else Poly.from_lin(rep)
    if isinstance(f, Floor):
        return Poly.from_lin(floor_div(f.arg.subst(sigma), f.div))
    arg = f.arg.subst(sigma)
    if arg.is_const() and arg.const == 1:
        return Poly() if isinstance(f, Log) else Poly.const(1)
    return Poly.factor(Log(arg) if isinstance(f, Log) else Pow(arg))


# ---------------------------------------------------------------------------
# DNF guards: tuple of conjunctions; a conjunction is a frozenset of Lin atoms "e >= 0"

Conj = frozenset
DNF = tuple

TRUE: DNF = (frozenset(),)
FALSE: DNF = ()


def normalize_atom(e: Lin) -> Lin | bool:
    """Canonical integer form of e >= 0, or True/False when constant."""
    if e.is_const():
        return e.const >= 0
    den = 1
    for _, c in e.terms:
        den = den * c.denominator // math.gcd(den, c.denominator)
    if den != 1:
        e = e.scale(den)
    g = 0
    for _, c in e.terms:
        g = math.gcd(g, int(c))
    # integer-valued body: body + k >= 0  iff  body/g + floor(k/g) >= 0
    body = Lin(e.terms, 0).scale(Fraction(1, g))
    return body + math.floor(e.const / g)


def conj(atoms: Iterable[Lin]) -> Conj | None:
    """Normalized conjunction, or None when trivially false."""
    out = set()
    for a in atoms:
        n = normalize_atom(a)
        if n is True:
            continue
        if n is False:
            return None
        out.add(n)
    return frozenset(out)


def dnf(conjs: Iterable[Iterable[Lin]]) -> DNF:
    out = []
    for c in conjs:
        n = conj(c)
        if n is not None:
            out.append(n)
    return _reduce(out)


def _reduce(conjs: list[Conj]) -> DNF:
    uniq = sorted(set(conjs), key=lambda c: (len(c), sorted(a.key() for a in c)))
    kept: list[Conj] = []
    for c in uniq:
        if not any(k <= c for k in kept):
            kept.append(c)
    return tuple(kept)


def dnf_and(a: DNF, b: DNF) -> DNF:
    return _reduce([x | y for x in a for y in b])


def dnf_or(a: DNF, b: DNF) -> DNF:
    return _reduce(list(a) + list(b))


def negate_atom(e: Lin) -> Lin:
    """Integer negation: not(e >= 0) iff -e - 1 >= 0."""
    return -e - 1


def dnf_not(a: DNF) -> DNF:
    out: DNF = TRUE
    for c in a:
        out = dnf_and(out, dnf([[negate_atom(x)] for x in c]))
        if not out:
            break
    return out


def dnf_subst(a: DNF, sigma: Mapping[str, Lin]) -> DNF:
    return dnf([[x.subst(sigma) for x in c] for c in a])


def dnf_eval(a: DNF, env: Mapping[str, int]) -> bool:
    return any(all(x.eval(env) >= 0 for x in c) for c in a)


def conj_str(c: Conj) -> str:
    if not c:
        return "true"
    return " and ".join(f"{a} >= 0" for a in sorted(c, key=lambda x: x.key()))


def dnf_str(a: DNF) -> str:
    if not a:
        return "false"
    if len(a) == 1:
        return conj_str(a[0])
    return " or ".join(f"({conj_str(c)})" for c in a)


def iter_conj(a: DNF) -> Iterator[Conj]:
    return iter(a)
