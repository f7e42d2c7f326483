"""Operational semantics, the exact worst-case termination-time oracle, and invariant sampling."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .cfg import ASSIGN, BRANCH, CALL, DEMONIC, Cfg, Guard, Passing, Update
from .frontend import eval_expr, eval_pred
from .symbolic import DNF, dnf_eval

StackElement = tuple  # (function, label, valuation as tuple ordered by V_f)
Configuration = tuple  # tuple of StackElement, head first

DEFAULT_BUDGET = 10**6


class SemanticsError(Exception):
    pass


@dataclass(frozen=True)
class WorstCaseResult:
    """T-bar value; status is 'finite', 'inf' (proven divergence) or 'unknown' (budget exhausted)."""

    status: str
    value: Optional[int] = None

    @property
    def finite(self) -> bool:
        return self.status == "finite"

    def __str__(self) -> str:
        if self.status == "finite":
            return str(self.value)
        return "INF" if self.status == "inf" else "UNKNOWN(budget)"


INF = WorstCaseResult("inf")
UNKNOWN = WorstCaseResult("unknown")


def valuation(c: Cfg, fname: str, values: Mapping[str, int]) -> tuple:
    """Full valuation over V_f; unspecified variables are 0."""
    return tuple(int(values.get(v, 0)) for v in c[fname].variables)


def env_of(c: Cfg, fname: str, vals: tuple) -> dict[str, int]:
    return dict(zip(c[fname].variables, vals))


def _apply_update(c: Cfg, fname: str, vals: tuple, up: Update) -> tuple:
    if up.target is None:
        return vals
    env = env_of(c, fname, vals)
    env[up.target] = eval_expr(up.expr, env)
    return tuple(env[v] for v in c[fname].variables)


def _passing(c: Cfg, fname: str, vals: tuple, pa: Passing) -> tuple:
    env = env_of(c, fname, vals)
    bound = {p: eval_expr(a, env) for p, a in zip(pa.params, pa.args)}
    return tuple(bound.get(v, 0) for v in c[pa.callee].variables)


def _guard_holds(g: Guard, env: dict[str, int]) -> bool:
    v = eval_pred(g.pred, env)
    return not v if g.negated else v


def successors(c: Cfg, elem: StackElement) -> tuple[str, list]:
    """Kind of the head label and its successor descriptions.

    assignment/branching: [(label', valuation')]; call: [(callee element), (label', valuation)];
    demonic: [(label1, valuation), (label2, valuation)].
    """
    fname, lab, vals = elem
    fc = c[fname]
    kind = fc.kinds[lab]
    trans = fc.out[lab]
    if kind == ASSIGN:
        t = trans[0]
        return kind, [(t.dst, _apply_update(c, fname, vals, t.action))]
    if kind == BRANCH:
        env = env_of(c, fname, vals)
        hits = [t for t in trans if _guard_holds(t.action, env)]
        if len(hits) != 1:
            raise SemanticsError(f"stuck or ambiguous branch at {fname}:{lab}")
        return kind, [(hits[0].dst, vals)]
    if kind == CALL:
        t = trans[0]
        callee = t.action.callee
        return kind, [(callee, c[callee].l_in, _passing(c, fname, vals, t.action)), (t.dst, vals)]
    return kind, [(t.dst, vals) for t in trans]


def step(c: Cfg, w: Configuration, choice: Optional[int] = None) -> Configuration:
    """One transition of the operational semantics."""
    if not w:
        return w
    head, rest = w[0], w[1:]
    fname = head[0]
    out = c[fname].l_out
    kind, succ = successors(c, head)
    if kind == DEMONIC:
        labels = [s[0] for s in succ]
        if choice not in labels:
            raise SemanticsError(f"choice {choice} is not a successor of demonic label {head[1]}")
        lab, vals = choice, head[2]
    elif choice is not None:
        raise SemanticsError("a choice is only allowed at demonic labels")
    elif kind == CALL:
        callee_elem, (lab, vals) = succ
        cont = () if lab == out else ((fname, lab, vals),)
        return (callee_elem,) + cont + rest
    else:
        lab, vals = succ[0]
    return rest if lab == out else ((fname, lab, vals),) + rest


class Oracle:
    """Exact worst-case termination time T-bar with memoization shared across queries."""

    def __init__(self, c: Cfg, budget: int = DEFAULT_BUDGET):
        self.cfg = c
        self.budget = budget
        self.memo: dict[StackElement, object] = {}
        self.expanded = 0

    def time(self, elem: StackElement) -> WorstCaseResult:
        c = self.cfg
        memo = self.memo
        if elem in memo:
            return self._wrap(memo[elem])
        stack: list[tuple[StackElement, Optional[tuple]]] = [(elem, None)]
        on_path: set[StackElement] = set()
        inf = float("inf")
        while stack:
            cur, info = stack[-1]
            if cur in memo:
                stack.pop()
                continue
            fname, lab, vals = cur
            if lab == c[fname].l_out:
                memo[cur] = 0
                stack.pop()
                continue
            if info is None:
                self.expanded += 1
                if self.expanded > self.budget:
                    return UNKNOWN
                kind, succ = successors(c, cur)
                if kind == CALL:
                    kids = [succ[0], (fname,) + succ[1]]
                else:
                    kids = [(fname,) + s for s in succ]
                stack[-1] = (cur, (kind, kids))
                on_path.add(cur)
                for k in kids:
                    if k in on_path:
                        memo[cur] = inf
                        break
                else:
                    for k in kids:
                        if k not in memo:
                            stack.append((k, None))
                    continue
                on_path.discard(cur)
                stack.pop()
                continue
            kind, kids = info
            vals_k = [memo.get(k) for k in kids]
            if any(v is None for v in vals_k):
                # a child was skipped because it closed a cycle elsewhere; resolve it now
                for k, v in zip(kids, vals_k):
                    if v is None:
                        if k in on_path:
                            memo[cur] = inf
                            break
                        stack.append((k, None))
                if cur in memo:
                    on_path.discard(cur)
                    stack.pop()
                continue
            if kind == CALL:
                val = 1 + vals_k[0] + vals_k[1]
            elif kind == DEMONIC:
                val = 1 + max(vals_k)
            else:
                val = 1 + vals_k[0]
            memo[cur] = val
            on_path.discard(cur)
            stack.pop()
        return self._wrap(memo[elem])

    @staticmethod
    def _wrap(v) -> WorstCaseResult:
        if v == float("inf"):
            return INF
        return WorstCaseResult("finite", int(v))

    def entry_time(self, fname: str, values: Mapping[str, int]) -> WorstCaseResult:
        c = self.cfg
        return self.time((fname, c[fname].l_in, valuation(c, fname, values)))


def worst_case_time(c: Cfg, elem: StackElement, budget: int = DEFAULT_BUDGET) -> WorstCaseResult:
    return Oracle(c, budget).time(elem)


@dataclass(frozen=True)
class Violation:
    function: str
    label: int
    valuation: dict

    def __str__(self) -> str:
        vals = ", ".join(f"{k}={v}" for k, v in self.valuation.items())
        return f"({self.function}, {self.label}, {{{vals}}})"


def sample_invariant_check(
    c: Cfg,
    inv: Mapping[tuple[str, int], DNF],
    seeds: Iterable[Mapping[str, int]],
    entry: Optional[str] = None,
    max_configs: int = 20000,
    random_runs: int = 20,
    max_steps: int = 5000,
    seed: int = 0,
) -> list[Violation]:
    """Explore runs from the seeds (shallow exhaustive plus random schedulers) and report invariant violations."""
    entry = entry or c.program.entry
    rng = random.Random(seed)
    found: dict[tuple, Violation] = {}

    def check(elem: StackElement) -> None:
        fname, lab, vals = elem
        d = inv.get((fname, lab))
        if d is None:
            return
        env = env_of(c, fname, vals)
        if not dnf_eval(d, env) and elem not in found:
            found[elem] = Violation(fname, lab, env)

    for s in seeds:
        start: Configuration = ((entry, c[entry].l_in, valuation(c, entry, s)),)
        seen = {start}
        queue = deque([start])
        while queue and len(seen) < max_configs:
            w = queue.popleft()
            if not w:
                continue
            check(w[0])
            kind, succ = successors(c, w[0])
            nexts = [step(c, w, lab) for lab, _ in succ] if kind == DEMONIC else [step(c, w)]
            for nw in nexts:
                if nw not in seen:
                    seen.add(nw)
                    queue.append(nw)
        for _ in range(random_runs):
            w = start
            for _ in range(max_steps):
                if not w:
                    break
                check(w[0])
                kind, succ = successors(c, w[0])
                w = step(c, w, rng.choice(succ)[0]) if kind == DEMONIC else step(c, w)
    return list(found.values())
