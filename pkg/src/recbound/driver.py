"""Pipeline orchestration: analysis, exponent search, verification, oracle comparison, corpus runs."""

from __future__ import annotations

import ast
import itertools
import math
import operator
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import mpmath

from . import constants as K
from .abstraction import AbstractedTriple, AbstractionSpace, abstract
from .abstraction import dump as dump_gamma
from .cfg import Cfg, build_cfg
from .constraints import ConstraintTriple, generate_triples, prune_unsat
from .constraints import dump as dump_triples
from .expansion import dump as dump_expansion
from .expansion import expand
from .frontend import parse
from .invariant import InvariantMap, invariant_map
from .numeric import DPS, dominates, eval_poly
from .positivstellensatz import (
    Certificate,
    HandelmanLP,
    MonoidBasis,
    _certify_all,
    _qs,
    assemble_lp,
    certify_block,
    set_leading_objective,
    solve,
)
from .semantics import Oracle, sample_invariant_check
from .symbolic import Lin, Poly, Var, dnf_eval
from .template import EXP, LOG, NONE, TemplateError, TemplateMap, TemplateParams, build_template, growth_classes
from .template import parse_restriction

VERIFY_GRID = 10**15  # constant enclosures used when a supplied coefficient is irrational
IRRATIONAL_STEP = Fraction(1, 10**12)


class InvariantError(Exception):
    """Sampled executions violate a supplied invariant."""


# ---------------------------------------------------------------------------
# configuration and results


@dataclass
class AnalysisConfig:
    program: str  # path, corpus name, or program text
    d: int = 1
    op: str = NONE
    r: Optional[Fraction] = None
    k: int = 1
    search: Optional[tuple[Fraction, Fraction, Fraction]] = None  # (lo, hi, eps)
    objective: str = "leading"
    restrict: Optional[Mapping[str, Sequence[str]]] = None
    dumps: frozenset = frozenset()  # subset of {"expansion", "triples", "gamma"}
    skip_sanity: bool = False
    oracle_grid: Optional[list[dict[str, int]]] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.r is not None:
            self.r = Fraction(self.r)
        if self.search is not None:
            lo, hi, eps = (Fraction(x) for x in self.search)
            if not (1 < lo <= hi and eps > 0):
                raise ValueError("search range needs 1 < lo <= hi and eps > 0")
            self.search = (lo, hi, eps)
        if self.objective not in ("leading", "none"):
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def params(self) -> TemplateParams:
        return TemplateParams(self.d, self.op, self.r)


@dataclass
class Bound:
    function: str
    label: int
    poly: Poly  # template with coefficients substituted
    expression: str


@dataclass
class MeasureSolution:
    config: AnalysisConfig
    cfg: Cfg
    inv: InvariantMap
    templates: TemplateMap
    certificate: Certificate
    bounds: list[Bound]
    stats: dict
    dumps: dict[str, str] = field(default_factory=dict)

    status = "success"

    @property
    def entry(self) -> Bound:
        e = self.cfg.program.entry
        lab = self.cfg[e].l_in
        return next(b for b in self.bounds if b.function == e and b.label == lab)

    def entry_value(self, env: Mapping[str, int]) -> mpmath.mpf:
        """Bound at the entry label; zero outside the entry invariant."""
        e = self.entry
        if not dnf_eval(self.inv[(e.function, e.label)], env):
            return mpmath.mpf(0)
        with mpmath.workdps(DPS):
            return eval_poly(e.poly, env, {}, self.config.r)

    def dominates(self, env: Mapping[str, int], value: int) -> bool:
        """Entry bound >= value, exact whenever the bound is rational at env."""
        e = self.entry
        if not dnf_eval(self.inv[(e.function, e.label)], env):
            return value <= 0
        return dominates(e.poly, env, {}, value, self.config.r)

    def to_json(self) -> dict:
        return {
            "status": "success",
            "bounds": [{"function": b.function, "label": b.label, "expression": b.expression} for b in self.bounds],
            "certificate": self.certificate.to_json(),
            "stats": self.stats,
        }


@dataclass
class Failure:
    reason: str  # infeasible | unbounded | numerical | template-empty | all-infeasible
    stats: dict = field(default_factory=dict)
    dumps: dict[str, str] = field(default_factory=dict)

    status = "failure"

    def to_json(self) -> dict:
        return {"status": "failure", "reason": self.reason, "bounds": [], "certificate": None, "stats": self.stats}


Outcome = Union[MeasureSolution, Failure]


# ---------------------------------------------------------------------------
# program loading and default grids


def corpus_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("recbound.corpus").iterdir() if p.name.endswith(".rec"))


def load_source(program: str) -> str:
    """Program text from a path, a bundled corpus name, or the text itself."""
    if "{" in program:
        return program
    path = Path(program)
    if path.exists():
        return path.read_text()
    name = path.stem if path.suffix == ".rec" else program
    res = resources.files("recbound.corpus").joinpath(f"{name}.rec")
    if res.is_file():
        return res.read_text()
    raise FileNotFoundError(program)


def load_cfg(program: str) -> Cfg:
    return build_cfg(parse(load_source(program)))


def _range_grid(max_len: int, starts: Iterable[int] = (0, 1, 2)) -> list[dict[str, int]]:
    return [{"i": i, "j": i + n - 1} for i in starts for n in range(1, max_len + 1)]


ORACLE_GRIDS: dict[str, list[dict[str, int]]] = {
    "binary_search": [{"n": n} for n in range(1, 65)],
    "merge_sort": _range_grid(16),
    "closest_pair": _range_grid(16),
    "karatsuba": [{"n": n} for n in (1, 2, 4, 8)],
    "strassen": [{"n": n} for n in (1, 2, 4, 8)],
    "randwalk": [{"i": i, "j": j} for i in range(10) for j in range(10)],
    "nestedloop": [{"i": 0, "j": 0, "m": m, "n": n} for m in range(10) for n in range(10)],
}

CORPUS_DEFAULTS: dict[str, dict] = {
    "binary_search": dict(d=1, op=LOG, k=1),
    "merge_sort": dict(d=2, op=LOG, k=2),
    "karatsuba": dict(d=1, op=EXP, r=Fraction(8, 5), k=2),
    "strassen": dict(d=2, op=EXP, r=Fraction(19, 10), k=2),
    "closest_pair": dict(d=2, op=LOG, k=2),
    "randwalk": dict(d=1, op=NONE, k=1),
    "nestedloop": dict(d=2, op=NONE, k=2),
}


def default_grid(program: str) -> Optional[list[dict[str, int]]]:
    return ORACLE_GRIDS.get(Path(program).stem)


def sanity_seeds(c: Cfg, limit: int = 12, span: int = 9) -> list[dict[str, int]]:
    """Small entry valuations satisfying the entry invariant, smallest first."""
    entry = c.program.entry
    fc = c[entry]
    inv = invariant_map(c)[(entry, fc.l_in)]
    cands = itertools.product(range(0, span), repeat=len(fc.params))
    out = []
    for vals in sorted(cands, key=lambda v: (sum(v), v)):
        env = dict(zip(fc.params, vals))
        if dnf_eval(inv, env):
            out.append(env)
            if len(out) >= limit:
                break
    return out


# ---------------------------------------------------------------------------
# the pipeline


def _pipeline(
    c: Cfg,
    inv: InvariantMap,
    tm: TemplateMap,
    cfg: AnalysisConfig,
    dumps: dict[str, str],
) -> tuple[list[AbstractedTriple], HandelmanLP, dict]:
    r = cfg.r if cfg.op == EXP else None
    stats: dict = {}
    t0 = time.perf_counter()
    ex = expand(c, tm, inv)
    if "expansion" in cfg.dumps:
        dumps["expansion"] = dump_expansion(ex, r)
    triples = generate_triples(c, inv, ex)
    pruned = prune_unsat(triples)
    if "triples" in cfg.dumps:
        dumps["triples"] = dump_triples(pruned, r)
    ats = [abstract(t, r, cfg.op) for t in pruned]
    if "gamma" in cfg.dumps:
        dumps["gamma"] = dump_gamma(ats, r)
    lp = assemble_lp(ats, cfg.k, tm.tvars)
    live = [a for a in ats if not a.empty]
    stats.update(
        triples_generated=len(triples),
        triples=len(pruned),
        gamma_max=max((len(a.gamma) for a in live), default=0),
        gamma_total=sum(len(a.gamma) for a in live),
        basis_size=sum(len(b.basis) for b in lp.blocks),
        lp_rows=lp.size()[0],
        lp_columns=lp.size()[1],
        template_variables=len(tm.tvars),
        build_seconds=round(time.perf_counter() - t0, 4),
    )
    return ats, lp, stats


def _bounds(c: Cfg, tm: TemplateMap, assign: Mapping[str, Fraction], r) -> list[Bound]:
    out = []
    for (f, lab), p in tm.templates.items():
        q = p.eval_coeffs(assign)
        out.append(Bound(f, lab, q, q.render(r)))
    return out


def analyze(cfg: AnalysisConfig) -> Outcome:
    """Synthesize a measure function for the configured quadruple; Failure when the LP has no solution."""
    if cfg.search is not None:
        return search_exponent(cfg).outcome
    t0 = time.perf_counter()
    c = load_cfg(cfg.program)
    inv = invariant_map(c)
    if not cfg.skip_sanity:
        bad = sample_invariant_check(c, inv, sanity_seeds(c), max_configs=3000, random_runs=5, max_steps=2000)
        if bad:
            raise InvariantError("invariant violated at " + ", ".join(str(v) for v in bad[:5]))
    restrict = parse_restriction(cfg.restrict, c) if cfg.restrict else None
    try:
        tm = build_template(c, inv, cfg.params, restrict)
    except TemplateError as e:
        if "template-empty" in str(e):
            return Failure("template-empty")
        raise
    dumps: dict[str, str] = {}
    ats, lp, stats = _pipeline(c, inv, tm, cfg, dumps)
    if cfg.objective == "leading":
        entry_key = (c.program.entry, c[c.program.entry].l_in)
        set_leading_objective(lp, growth_classes(tm.templates[entry_key], cfg.r if cfg.op == EXP else None))
    res = solve(lp)
    stats.update({f"solve_{k}": v for k, v in res.stats.items() if k not in ("rows", "columns", "triples")})
    stats["seconds"] = round(time.perf_counter() - t0, 4)
    if not res.ok:
        return Failure(res.status, stats, dumps)
    bounds = _bounds(c, tm, res.certificate.assignment, cfg.r if cfg.op == EXP else None)
    return MeasureSolution(cfg, c, inv, tm, res.certificate, bounds, stats, dumps)


@dataclass
class SearchResult:
    r: Optional[Fraction]
    outcome: Outcome
    probes: list[tuple[Fraction, bool]]


def search_exponent(cfg: AnalysisConfig) -> SearchResult:
    """Bisection for the smallest feasible exponent in [lo, hi] up to eps."""
    assert cfg.search is not None
    lo, hi, eps = cfg.search
    probes: list[tuple[Fraction, bool]] = []

    def attempt(r: Fraction) -> Outcome:
        sub = AnalysisConfig(**{**cfg.__dict__, "search": None, "r": r, "op": EXP})
        out = analyze(sub)
        probes.append((r, isinstance(out, MeasureSolution)))
        return out

    best = attempt(hi)
    if not isinstance(best, MeasureSolution):
        return SearchResult(None, Failure("all-infeasible", best.stats), probes)
    best_r = hi
    low = attempt(lo)
    if isinstance(low, MeasureSolution):
        return SearchResult(lo, low, probes)
    while best_r - lo > eps:
        mid = (lo + best_r) / 2
        out = attempt(mid)
        if isinstance(out, MeasureSolution):
            best, best_r = out, mid
        else:
            lo = mid
    return SearchResult(best_r, best, probes)


# ---------------------------------------------------------------------------
# oracle comparison


@dataclass
class OracleCheck:
    checked: int
    counterexamples: list[tuple[dict, int, mpmath.mpf]]

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def oracle_check(sol: MeasureSolution, grid: Iterable[Mapping[str, int]]) -> OracleCheck:
    """Exact worst-case time against the synthesized entry bound on every grid point."""
    oracle = Oracle(sol.cfg)
    entry = sol.cfg.program.entry
    bad = []
    n = 0
    for env in grid:
        t = oracle.entry_time(entry, env)
        if not t.finite:
            bad.append((dict(env), -1, mpmath.mpf(0)))
            continue
        n += 1
        if not sol.dominates(env, t.value):
            bad.append((dict(env), t.value, sol.entry_value(env)))
    return OracleCheck(n, bad)


# ---------------------------------------------------------------------------
# verification of a supplied assignment

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_coefficient(text: str) -> tuple[Fraction, bool]:
    """(value, exact). Rationals are exact; expressions with ln/log/sqrt/e are evaluated and rounded up."""
    text = str(text).strip()
    try:
        return Fraction(text), True
    except ValueError:
        pass

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return mpmath.mpf(Fraction(str(node.value)).numerator) / Fraction(str(node.value)).denominator
        if isinstance(node, ast.Name) and node.id == "e":
            return mpmath.e
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            return mpmath.power(ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
            fn = {"ln": mpmath.log, "log": mpmath.log, "sqrt": mpmath.sqrt}.get(node.func.id)
            if fn is not None:
                return fn(ev(node.args[0]))
        raise ValueError(f"unsupported coefficient expression {text!r}")

    with mpmath.workdps(60):
        x = ev(ast.parse(text.replace("^", "**"), mode="eval"))
        steps = math.ceil(x / mpmath.mpf(IRRATIONAL_STEP.numerator) * IRRATIONAL_STEP.denominator)
    return (steps + 1) * IRRATIONAL_STEP, False


def read_coefficients(path_or_map) -> dict[str, str]:
    """Flat map variable -> value from JSON or ``name = value`` / ``name: value`` lines."""
    if isinstance(path_or_map, Mapping):
        return {k: str(v) for k, v in path_or_map.items()}
    text = Path(path_or_map).read_text()
    if text.lstrip().startswith("{"):
        import json

        return {k: str(v) for k, v in json.loads(text).items()}
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=") if "=" in line else line.partition(":")
        out[key.strip()] = val.strip()
    return out


@dataclass
class VerifyReport:
    passed: bool
    assignment: dict[str, Fraction]
    rounded: list[str]  # variables whose supplied value was irrational and rounded up
    failures: list[str]
    certificate: Optional[Certificate] = None
    oracle: Optional[OracleCheck] = None

    def lines(self) -> list[str]:
        out = ["PASS" if self.passed else "FAIL"]
        for t in self.rounded:
            out.append(f"  {t} rounded up to {_qs(self.assignment[t])}")
        out.extend(f"  violated: {f}" for f in self.failures)
        if self.oracle is not None:
            out.append(f"  oracle points checked: {self.oracle.checked}")
            for env, t, b in self.oracle.counterexamples[:5]:
                out.append(f"  oracle counterexample {env}: T={t} > bound={mpmath.nstr(b, 12)}")
        if self.certificate is not None and self.passed:
            for bl, mult in zip(self.certificate.blocks, self.certificate.multipliers):
                terms = " + ".join(f"{_qs(v)}*{bl.basis.label(i)}" for i, v in sorted(mult.items())) or "0"
                out.append(f"  [{bl.tag}] {terms}")
        return out


def verify(
    program: str,
    coefficients,
    d: int = 1,
    op: str = NONE,
    r: Optional[Fraction] = None,
    k: int = 1,
    grid: Optional[Iterable[Mapping[str, int]]] = None,
    restrict: Optional[Mapping[str, Sequence[str]]] = None,
) -> VerifyReport:
    """Fix the template variables and ask only for Handelman multipliers, then sample against the oracle."""
    raw = read_coefficients(coefficients)
    cfg = AnalysisConfig(program, d, op, r, k, restrict=restrict, skip_sanity=True)
    c = load_cfg(program)
    inv = invariant_map(c)
    tm = build_template(c, inv, cfg.params, parse_restriction(restrict, c) if restrict else None)
    missing = [t for t in tm.tvars if t not in raw]
    extra = [t for t in raw if t not in tm.tvars]
    if missing or extra:
        raise ValueError(f"coefficient keys do not match the template: missing {missing}, unknown {extra}")
    assign: dict[str, Fraction] = {}
    rounded = []
    for t in tm.tvars:
        v, exact = parse_coefficient(raw[t])
        assign[t] = v
        if not exact:
            rounded.append(t)
    grid_ = VERIFY_GRID if rounded else K.GRID
    with K.precision(grid_):
        _, lp, stats = _pipeline(c, inv, tm, cfg, {})
        failures = []
        mults = []
        for bi, bl in enumerate(lp.blocks):
            m = certify_block(lp, bi, assign)
            if m is None:
                failures.append(f"[{bl.tag}] {bl.at.triple.render(cfg.r if op == EXP else None)}")
            mults.append(m)
    cert = Certificate(assign, mults, lp.blocks, "verify") if not failures else None
    report = VerifyReport(not failures, assign, rounded, failures, cert)
    grid = grid if grid is not None else default_grid(program)
    if grid is not None:
        sol = MeasureSolution(cfg, c, inv, tm, cert, _bounds(c, tm, assign, cfg.r if op == EXP else None), stats)
        report.oracle = oracle_check(sol, grid)
        report.passed = report.passed and report.oracle.ok
    return report


# ---------------------------------------------------------------------------
# the single-constraint Karatsuba instance


@dataclass
class MicroReport:
    passed: bool
    gamma: list[Lin]
    obligation: Poly
    decomposition: dict[str, Fraction]

    def text(self) -> str:
        lhs = self.obligation.render()
        rhs = " + ".join(f"{_qs(v)}*{k}" for k, v in self.decomposition.items())
        head = "PASS" if self.passed else "FAIL"
        return f"{head}\n  Gamma = {{{', '.join(str(g) for g in self.gamma)}}}\n  {lhs} = {rhs}"


def karatsuba_micro(c: Fraction, r: Fraction = Fraction(8, 5)) -> MicroReport:
    """c*u - 3*c*(1/2)^r*u - 7*n >= 0 under n >= 2, u >= 2^r, u >= 2^(r-1)*n, with u standing for n^r."""
    c = Fraction(c)
    half = K.power(Fraction(1, 2), r).hi  # u >= 0, so the larger (1/2)^r weakens the claim
    n, u = Lin.var("n"), Lin.var("u")
    gamma = [n - 2, u - K.power(Fraction(2), r).lo, u - n.scale(K.power(Fraction(2), r - 1).lo)]
    ob = Poly.factor(Var("u")).scale(c * (1 - 3 * half)) - Poly.factor(Var("n")).scale(7)
    triple = ConstraintTriple("karatsuba", frozenset(), ob, "micro")
    at = AbstractedTriple(triple, AbstractionSpace(["n", "u"]), gamma, ob)
    lp = assemble_lp([at], 1)
    mults = _certify_all(lp, {})
    if mults is None:
        return MicroReport(False, gamma, ob, {})
    basis: MonoidBasis = lp.blocks[0].basis
    dec = {basis.label(i): v for i, v in sorted(mults[0].items())}
    return MicroReport(True, gamma, ob, dec)


# ---------------------------------------------------------------------------
# corpus runner


def corpus_config(name: str, **overrides) -> AnalysisConfig:
    return AnalysisConfig(name, **{**CORPUS_DEFAULTS[name], **overrides})


def _run_one(name: str) -> tuple[str, dict]:
    t0 = time.perf_counter()
    out = analyze(corpus_config(name))
    row = {"status": out.status, "seconds": round(time.perf_counter() - t0, 3)}
    if isinstance(out, MeasureSolution):
        row["bound"] = out.entry.expression
        grid = ORACLE_GRIDS.get(name)
        if grid is not None:
            row["oracle_ok"] = oracle_check(out, grid).ok
    else:
        row["reason"] = out.reason
    return name, row


def run_corpus(names: Optional[Sequence[str]] = None, workers: Optional[int] = None) -> dict[str, dict]:
    """Analyze the bundled programs concurrently with their default quadruples."""
    names = list(names or [n for n in corpus_names() if n in CORPUS_DEFAULTS])
    if workers == 1:
        return dict(_run_one(n) for n in names)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(_run_one, names))
