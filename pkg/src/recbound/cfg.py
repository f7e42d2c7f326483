"""Control-flow graphs built inductively from the AST."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .frontend import ArithExpr, Assign, Call, If, Pred, Program, Seq, Skip, Stmt, While, print_expr, print_pred, to_dnf, to_lin
from .symbolic import DNF, Lin, dnf_not

ASSIGN, BRANCH, CALL, DEMONIC = "assignment", "branching", "call", "demonic"


@dataclass(frozen=True)
class Update:
    """Assignment descriptor; target None means the identity update of skip."""

    target: Optional[str]
    expr: Optional[ArithExpr]

    def sigma(self) -> dict[str, Lin]:
        return {} if self.target is None else {self.target: to_lin(self.expr)}

    def __str__(self) -> str:
        return "id" if self.target is None else f"{self.target} <- {print_expr(self.expr)}"


@dataclass(frozen=True)
class Passing:
    """Value-passing descriptor: callee parameters bound to caller expressions, callee locals to 0."""

    callee: str
    params: tuple[str, ...]
    args: tuple[ArithExpr, ...]
    locals: tuple[str, ...]

    def sigma(self) -> dict[str, Lin]:
        out = {p: to_lin(a) for p, a in zip(self.params, self.args)}
        out.update({q: Lin.constant(0) for q in self.locals})
        return out

    def __str__(self) -> str:
        binds = ", ".join(f"{p}->{print_expr(a)}" for p, a in zip(self.params, self.args))
        return f"({self.callee}, {binds})"


@dataclass(frozen=True)
class Guard:
    """Branch guard: AST predicate (or its negation) with its DNF view."""

    pred: Pred
    negated: bool
    dnf: DNF

    def __str__(self) -> str:
        s = print_pred(self.pred)
        return f"not ({s})" if self.negated else s


STAR = "*"
Action = Union[Update, Passing, Guard, str]


@dataclass(frozen=True)
class Transition:
    src: int
    action: Action
    dst: int

    def __str__(self) -> str:
        return f"({self.src}, {self.action}, {self.dst})"


@dataclass
class FunctionCfg:
    name: str
    params: tuple[str, ...]
    variables: tuple[str, ...]
    l_in: int
    l_out: int
    kinds: dict[int, str] = field(default_factory=dict)
    out: dict[int, list[Transition]] = field(default_factory=dict)
    while_heads: set[int] = field(default_factory=set)

    @property
    def labels(self) -> list[int]:
        return sorted(set(self.kinds) | {self.l_out})

    def transitions(self) -> list[Transition]:
        return [t for lab in sorted(self.out) for t in self.out[lab]]

    def successors(self, lab: int) -> list[int]:
        return [t.dst for t in self.out.get(lab, [])]

    def add(self, t: Transition) -> None:
        self.out.setdefault(t.src, []).append(t)


@dataclass
class Cfg:
    program: Program
    functions: dict[str, FunctionCfg]

    def __getitem__(self, name: str) -> FunctionCfg:
        return self.functions[name]

    def dump(self) -> str:
        lines = []
        for f in self.functions.values():
            lines.append(f"{f.name}: in={f.l_in} out={f.l_out}")
            lines += [f"  {t}" for t in f.transitions()]
        return "\n".join(lines)


def build_cfg(p: Program) -> Cfg:
    fns: dict[str, FunctionCfg] = {}
    decls = {f.name: f for f in p.functions}
    varsets = {f.name: tuple(f.variables()) for f in p.functions}
    for f in p.functions:
        fc = FunctionCfg(f.name, f.params, varsets[f.name], f.in_label, f.out_label)

        def build(s: Stmt, out: int) -> int:
            if isinstance(s, Seq):
                nxt = out
                for t in reversed(s.stmts):
                    nxt = build(t, nxt)
                return nxt
            if isinstance(s, Skip):
                fc.kinds[s.label] = ASSIGN
                fc.add(Transition(s.label, Update(None, None), out))
            elif isinstance(s, Assign):
                fc.kinds[s.label] = ASSIGN
                fc.add(Transition(s.label, Update(s.target, s.expr), out))
            elif isinstance(s, Call):
                g = decls[s.callee]
                locs = tuple(v for v in varsets[g.name] if v not in g.params)
                fc.kinds[s.label] = CALL
                fc.add(Transition(s.label, Passing(g.name, g.params, s.args, locs), out))
            elif isinstance(s, If):
                l1 = build(s.then, out)
                l2 = build(s.orelse, out)
                if s.cond is None:
                    fc.kinds[s.label] = DEMONIC
                    fc.add(Transition(s.label, STAR, l1))
                    fc.add(Transition(s.label, STAR, l2))
                else:
                    fc.kinds[s.label] = BRANCH
                    d = to_dnf(s.cond)
                    fc.add(Transition(s.label, Guard(s.cond, False, d), l1))
                    fc.add(Transition(s.label, Guard(s.cond, True, dnf_not(d)), l2))
            elif isinstance(s, While):
                fc.kinds[s.label] = BRANCH
                fc.while_heads.add(s.label)
                body_in = build(s.body, s.label)
                d = to_dnf(s.cond)
                fc.add(Transition(s.label, Guard(s.cond, False, d), body_in))
                fc.add(Transition(s.label, Guard(s.cond, True, dnf_not(d)), out))
            return s.label

        entry = build(f.body, f.out_label)
        assert entry == f.in_label
        fns[f.name] = fc
    return Cfg(p, fns)


def significant_labels(c: Cfg) -> dict[str, list[int]]:
    return {name: sorted({f.l_in} | f.while_heads) for name, f in c.functions.items()}
