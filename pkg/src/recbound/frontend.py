"""Lexer, parser, validator and pretty-printer for the recursive toy language.

Grammar (comments start with ``//``)::

    prog  ::= func+
    func  ::= ID '(' params ')' '{' ['[' pred ']'] seq '}'
    seq   ::= stmt (';' stmt)*
    stmt  ::= 'skip' | ID ':=' expr | ID '(' args ')'
            | 'if' ('*' | pred) 'then' seq 'else' seq 'fi'
            | ['[' pred ']'] 'while' pred 'do' seq 'od'
    expr  ::= INT | ID | 'floor' '(' expr '/' INT ')' | expr ('+'|'-') expr | INT '*' expr
    pred  ::= expr ('<='|'>=') expr | 'not' pred | pred 'and' pred | pred 'or' pred

Unicode forms (⌊e/c⌋, ≤, ≥, ¬, ∧, ∨, ⋆) are accepted as synonyms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .symbolic import DNF, Lin, TRUE, dnf, dnf_and, dnf_not, dnf_or, floor_div


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


class ValidationError(Exception):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class FloorDiv:
    child: "ArithExpr"
    div: int


@dataclass(frozen=True)
class Add:
    left: "ArithExpr"
    right: "ArithExpr"


@dataclass(frozen=True)
class Sub:
    left: "ArithExpr"
    right: "ArithExpr"


@dataclass(frozen=True)
class Scale:
    factor: int
    child: "ArithExpr"


ArithExpr = Union[Const, VarRef, FloorDiv, Add, Sub, Scale]


@dataclass(frozen=True)
class Cmp:
    op: str  # "<=" or ">="
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Not:
    child: "Pred"


@dataclass(frozen=True)
class And:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Or:
    left: "Pred"
    right: "Pred"


Pred = Union[Cmp, Not, And, Or]


@dataclass(frozen=True)
class Skip:
    label: int


@dataclass(frozen=True)
class Assign:
    label: int
    target: str
    expr: ArithExpr


@dataclass(frozen=True)
class Call:
    label: int
    callee: str
    args: tuple[ArithExpr, ...]


@dataclass(frozen=True)
class If:
    label: int
    cond: Optional[Pred]  # None means demonic choice
    then: "Stmt"
    orelse: "Stmt"


@dataclass(frozen=True)
class While:
    label: int
    cond: Pred
    body: "Stmt"
    inv: Optional[Pred]


@dataclass(frozen=True)
class Seq:
    stmts: tuple["Stmt", ...]


Stmt = Union[Skip, Assign, Call, If, While, Seq]


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: tuple[str, ...]
    body: Stmt
    entry_inv: Optional[Pred]
    in_label: int
    out_label: int

    def invariants(self) -> dict[int, Optional[Pred]]:
        """Annotated invariants keyed by significant label (entry and while heads)."""
        out: dict[int, Optional[Pred]] = {self.in_label: self.entry_inv}
        for s in walk(self.body):
            if isinstance(s, While):
                prev = out.get(s.label)
                if prev is not None and s.inv is not None:
                    out[s.label] = And(prev, s.inv)
                elif s.inv is not None or s.label not in out:
                    out[s.label] = s.inv
        return out

    def variables(self) -> list[str]:
        """V_f: parameters first, then every other variable in order of appearance."""
        seen = list(self.params)
        for s in walk(self.body):
            names: list[str] = []
            if isinstance(s, Assign):
                names = [s.target] + sorted(expr_vars(s.expr))
            elif isinstance(s, Call):
                for a in s.args:
                    names += sorted(expr_vars(a))
            elif isinstance(s, (If, While)) and s.cond is not None:
                names = sorted(pred_vars(s.cond))
            if isinstance(s, While) and s.inv is not None:
                names += sorted(pred_vars(s.inv))
            for n in names:
                if n not in seen:
                    seen.append(n)
        if self.entry_inv is not None:
            for n in sorted(pred_vars(self.entry_inv)):
                if n not in seen:
                    seen.append(n)
        return seen


@dataclass(frozen=True)
class Program:
    functions: tuple[FunctionDecl, ...]
    entry: str
    entry_pred: Optional[Pred] = field(default=None)

    def function(self, name: str) -> FunctionDecl:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


def walk(s: Stmt):
    """Pre-order traversal of statements (Seq nodes are not yielded)."""
    if isinstance(s, Seq):
        for t in s.stmts:
            yield from walk(t)
        return
    yield s
    if isinstance(s, If):
        yield from walk(s.then)
        yield from walk(s.orelse)
    elif isinstance(s, While):
        yield from walk(s.body)


def expr_vars(e: ArithExpr) -> set[str]:
    if isinstance(e, VarRef):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (FloorDiv, Scale)):
        return expr_vars(e.child)
    return expr_vars(e.left) | expr_vars(e.right)


def pred_vars(p: Pred) -> set[str]:
    if isinstance(p, Cmp):
        return expr_vars(p.left) | expr_vars(p.right)
    if isinstance(p, Not):
        return pred_vars(p.child)
    return pred_vars(p.left) | pred_vars(p.right)


def expr_has_floor(e: ArithExpr) -> bool:
    if isinstance(e, FloorDiv):
        return True
    if isinstance(e, (Const, VarRef)):
        return False
    if isinstance(e, Scale):
        return expr_has_floor(e.child)
    return expr_has_floor(e.left) or expr_has_floor(e.right)


def pred_has_floor(p: Pred) -> bool:
    if isinstance(p, Cmp):
        return expr_has_floor(p.left) or expr_has_floor(p.right)
    if isinstance(p, Not):
        return pred_has_floor(p.child)
    return pred_has_floor(p.left) or pred_has_floor(p.right)


# ---------------------------------------------------------------------------
# semantic views


def to_lin(e: ArithExpr) -> Lin:
    if isinstance(e, Const):
        return Lin.constant(e.value)
    if isinstance(e, VarRef):
        return Lin.var(e.name)
    if isinstance(e, FloorDiv):
        return floor_div(to_lin(e.child), e.div)
    if isinstance(e, Add):
        return to_lin(e.left) + to_lin(e.right)
    if isinstance(e, Sub):
        return to_lin(e.left) - to_lin(e.right)
    return to_lin(e.child).scale(e.factor)


def eval_expr(e: ArithExpr, env: dict[str, int]) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, VarRef):
        return env[e.name]
    if isinstance(e, FloorDiv):
        return eval_expr(e.child, env) // e.div
    if isinstance(e, Add):
        return eval_expr(e.left, env) + eval_expr(e.right, env)
    if isinstance(e, Sub):
        return eval_expr(e.left, env) - eval_expr(e.right, env)
    return e.factor * eval_expr(e.child, env)


def eval_pred(p: Pred, env: dict[str, int]) -> bool:
    if isinstance(p, Cmp):
        a, b = eval_expr(p.left, env), eval_expr(p.right, env)
        return a <= b if p.op == "<=" else a >= b
    if isinstance(p, Not):
        return not eval_pred(p.child, env)
    if isinstance(p, And):
        return eval_pred(p.left, env) and eval_pred(p.right, env)
    return eval_pred(p.left, env) or eval_pred(p.right, env)


def to_dnf(p: Optional[Pred]) -> DNF:
    """DNF view with atoms e >= 0; negation uses the integer shift by one."""
    if p is None:
        return TRUE
    if isinstance(p, Cmp):
        diff = to_lin(p.right) - to_lin(p.left) if p.op == "<=" else to_lin(p.left) - to_lin(p.right)
        return dnf([[diff]])
    if isinstance(p, Not):
        return dnf_not(to_dnf(p.child))
    if isinstance(p, And):
        return dnf_and(to_dnf(p.left), to_dnf(p.right))
    return dnf_or(to_dnf(p.left), to_dnf(p.right))


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|<=|>=|≤|≥|⌊|⌋|¬|∧|∨|⋆|[(){}\[\];,+\-*/])
    """,
    re.VERBOSE,
)

KEYWORDS = {"skip", "if", "then", "else", "fi", "while", "do", "od", "and", "or", "not", "floor"}
_SYNONYMS = {"≤": "<=", "≥": ">=", "¬": "not", "∧": "and", "∨": "or", "⋆": "*"}


@dataclass(frozen=True)
class Token:
    kind: str  # int, id, kw, sym, eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            out.append(Token("int", text, line, col))
        elif kind == "id":
            out.append(Token("kw" if text in KEYWORDS else "id", text, line, col))
        elif kind == "sym":
            text = _SYNONYMS.get(text, text)
            out.append(Token("kw" if text in KEYWORDS else "sym", text, line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.label = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("sym", "kw") and t.text == text

    def take(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.kind not in ("sym", "kw") or t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.take()

    def expect_id(self) -> Token:
        t = self.peek()
        if t.kind != "id":
            raise ParseError(f"expected identifier, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.take()

    def error(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    def next_label(self) -> int:
        self.label += 1
        return self.label

    # program
    def program(self) -> list[FunctionDecl]:
        funcs = []
        while self.peek().kind != "eof":
            funcs.append(self.function())
        if not funcs:
            raise self.error("empty program")
        return funcs

    def function(self) -> FunctionDecl:
        name = self.expect_id()
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            while True:
                p = self.expect_id()
                if p.text in params:
                    raise ParseError(f"duplicate parameter {p.text!r}", p.line, p.col)
                params.append(p.text)
                if not self.at(","):
                    break
                self.take()
        self.expect(")")
        self.expect("{")
        inv = None
        if self.at("["):
            inv = self.bracket()
        in_label = self.label + 1
        body = self.seq()
        if self.at("["):
            raise self.error("invariant bracket must precede a while loop")
        self.expect("}")
        out_label = self.next_label()
        return FunctionDecl(name.text, tuple(params), body, inv, in_label, out_label)

    def bracket(self) -> Pred:
        t = self.expect("[")
        if self.at("]"):
            raise ParseError("malformed invariant bracket: empty predicate", t.line, t.col)
        try:
            p = self.pred()
        except ParseError as exc:
            raise ParseError(f"malformed invariant bracket: {exc}", t.line, t.col) from exc
        self.expect("]")
        return p

    # statements
    _STMT_START = {"skip", "if", "while", "["}

    def starts_stmt(self) -> bool:
        t = self.peek()
        return t.kind == "id" or (t.kind in ("kw", "sym") and t.text in self._STMT_START)

    def seq(self) -> Stmt:
        stmts = [self.stmt()]
        while True:
            if self.at(";"):
                self.take()
                stmts.append(self.stmt())
            elif isinstance(stmts[-1], (If, While)) and self.starts_stmt():
                # tolerate a missing ';' after a closing 'fi' / 'od'
                stmts.append(self.stmt())
            else:
                break
        return stmts[0] if len(stmts) == 1 else Seq(tuple(stmts))

    def stmt(self) -> Stmt:
        t = self.peek()
        if self.at("skip"):
            self.take()
            return Skip(self.next_label())
        if self.at("["):
            inv = self.bracket()
            if not self.at("while"):
                raise ParseError("invariant bracket must precede a while loop", t.line, t.col)
            return self.while_stmt(inv)
        if self.at("while"):
            return self.while_stmt(None)
        if self.at("if"):
            self.take()
            label = self.next_label()
            cond: Optional[Pred]
            if self.at("*"):
                self.take()
                cond = None
            else:
                cond = self.pred()
            self.expect("then")
            then = self.seq()
            self.expect("else")
            orelse = self.seq()
            self.expect("fi")
            return If(label, cond, then, orelse)
        if t.kind == "id":
            name = self.take()
            if self.at(":="):
                self.take()
                return Assign(self.next_label(), name.text, self.expr())
            if self.at("("):
                self.take()
                args: list[ArithExpr] = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.at(","):
                            break
                        self.take()
                self.expect(")")
                return Call(self.next_label(), name.text, tuple(args))
            raise self.error("expected ':=' or '(' after identifier")
        raise self.error(f"expected a statement, found {t.text or 'end of input'!r}")

    def while_stmt(self, inv: Optional[Pred]) -> While:
        self.expect("while")
        label = self.next_label()
        cond = self.pred()
        self.expect("do")
        body = self.seq()
        self.expect("od")
        return While(label, cond, body, inv)

    # predicates
    def pred(self) -> Pred:
        p = self.pred_and()
        while self.at("or"):
            self.take()
            p = Or(p, self.pred_and())
        return p

    def pred_and(self) -> Pred:
        p = self.pred_unary()
        while self.at("and"):
            self.take()
            p = And(p, self.pred_unary())
        return p

    def pred_unary(self) -> Pred:
        if self.at("not"):
            self.take()
            return Not(self.pred_unary())
        if self.at("("):
            save = self.i
            self.take()
            try:
                p = self.pred()
                self.expect(")")
                if not (self.at("<=") or self.at(">=")):
                    return p
            except ParseError:
                pass
            self.i = save
        left = self.expr()
        t = self.peek()
        if not (self.at("<=") or self.at(">=")):
            raise ParseError(f"expected '<=' or '>=', found {t.text or 'end of input'!r}", t.line, t.col)
        op = self.take().text
        return Cmp(op, left, self.expr())

    # expressions
    def expr(self) -> ArithExpr:
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.take().text
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> ArithExpr:
        e = self.primary()
        while self.at("*"):
            t = self.take()
            rhs = self.primary()
            if isinstance(e, Const):
                e = Scale(e.value, rhs)
            elif isinstance(rhs, Const):
                e = Scale(rhs.value, e)
            else:
                raise ParseError("non-linear product: one factor must be an integer constant", t.line, t.col)
        return e

    def integer(self) -> int:
        neg = False
        if self.at("-"):
            self.take()
            neg = True
        t = self.peek()
        if t.kind != "int":
            raise ParseError("expected an integer", t.line, t.col)
        self.take()
        return -int(t.text) if neg else int(t.text)

    def primary(self) -> ArithExpr:
        t = self.peek()
        if t.kind == "int":
            self.take()
            return Const(int(t.text))
        if self.at("-") and self.peek(1).kind == "int":
            return Const(self.integer())
        if self.at("-"):
            self.take()
            return Scale(-1, self.primary())
        if t.kind == "id":
            self.take()
            return VarRef(t.text)
        if self.at("("):
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("floor") or self.at("⌊"):
            unicode = self.take().text == "⌊"
            if not unicode:
                self.expect("(")
            child = self.expr()
            self.expect("/")
            dt = self.peek()
            div = self.integer()
            if div == 0:
                raise ParseError("zero divisor in floor division", dt.line, dt.col)
            self.expect("⌋" if unicode else ")")
            return FloorDiv(child, div)
        raise ParseError(f"expected an expression, found {t.text or 'end of input'!r}", t.line, t.col)


def parse(source: str, entry: Optional[str] = None) -> Program:
    """Parse and validate a program. The entry defaults to the first function no other function calls."""
    parser = _Parser(tokenize(source))
    funcs = parser.program()
    names = [f.name for f in funcs]
    seen: set[str] = set()
    for f in funcs:
        if f.name in seen:
            raise ValidationError(f"duplicate function name {f.name!r}")
        seen.add(f.name)
    arity = {f.name: len(f.params) for f in funcs}
    called_by_others: set[str] = set()
    for f in funcs:
        for s in walk(f.body):
            if isinstance(s, Call):
                if s.callee not in arity:
                    raise ValidationError(f"call to undeclared function {s.callee!r} at label {s.label}")
                if len(s.args) != arity[s.callee]:
                    raise ValidationError(
                        f"call to {s.callee!r} at label {s.label} passes {len(s.args)} arguments, expected {arity[s.callee]}"
                    )
                if s.callee != f.name:
                    called_by_others.add(s.callee)
        for lab, inv in f.invariants().items():
            if inv is not None and pred_has_floor(inv):
                raise ValidationError(f"invariant at {f.name}:{lab} must be floor-free")
    if entry is None:
        roots = [n for n in names if n not in called_by_others]
        entry = roots[0] if roots else names[0]
    elif entry not in arity:
        raise ValidationError(f"unknown entry function {entry!r}")
    prog = Program(tuple(funcs), entry)
    return Program(prog.functions, entry, prog.function(entry).entry_inv)


# ---------------------------------------------------------------------------
# printer


def print_expr(e: ArithExpr) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, FloorDiv):
        return f"floor({print_expr(e.child)} / {e.div})"
    if isinstance(e, Add):
        return f"({print_expr(e.left)} + {print_expr(e.right)})"
    if isinstance(e, Sub):
        return f"({print_expr(e.left)} - {print_expr(e.right)})"
    return f"{e.factor} * {_paren(e.child)}"


def _paren(e: ArithExpr) -> str:
    s = print_expr(e)
    return s if isinstance(e, (Const, VarRef, FloorDiv, Add, Sub)) else f"({s})"


def print_pred(p: Pred) -> str:
    if isinstance(p, Cmp):
        return f"{print_expr(p.left)} {p.op} {print_expr(p.right)}"
    if isinstance(p, Not):
        return f"not ({print_pred(p.child)})"
    if isinstance(p, And):
        return f"({print_pred(p.left)} and {print_pred(p.right)})"
    return f"({print_pred(p.left)} or {print_pred(p.right)})"


def _print_stmt(s: Stmt, ind: int) -> list[str]:
    pad = "  " * ind
    if isinstance(s, Seq):
        lines: list[str] = []
        for k, t in enumerate(s.stmts):
            sub = _print_stmt(t, ind)
            if k < len(s.stmts) - 1:
                sub[-1] += ";"
            lines += sub
        return lines
    if isinstance(s, Skip):
        return [f"{pad}skip"]
    if isinstance(s, Assign):
        return [f"{pad}{s.target} := {print_expr(s.expr)}"]
    if isinstance(s, Call):
        return [f"{pad}{s.callee}({', '.join(print_expr(a) for a in s.args)})"]
    if isinstance(s, If):
        cond = "*" if s.cond is None else print_pred(s.cond)
        return (
            [f"{pad}if {cond} then"]
            + _print_stmt(s.then, ind + 1)
            + [f"{pad}else"]
            + _print_stmt(s.orelse, ind + 1)
            + [f"{pad}fi"]
        )
    lines = [] if s.inv is None else [f"{pad}[{print_pred(s.inv)}]"]
    return lines + [f"{pad}while {print_pred(s.cond)} do"] + _print_stmt(s.body, ind + 1) + [f"{pad}od"]


def print_program(p: Program) -> str:
    out: list[str] = []
    for f in p.functions:
        out.append(f"{f.name}({', '.join(f.params)}) {{")
        if f.entry_inv is not None:
            out.append(f"  [{print_pred(f.entry_inv)}]")
        out += _print_stmt(f.body, 1)
        out.append("}")
        out.append("")
    return "\n".join(out)
