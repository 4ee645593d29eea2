"""Abstract syntax for global choreographies.

Statement nodes carry a ``span`` that is excluded from equality, so two
statements written on different lines compare equal when their structure
(including send-site ids) matches.  That is what branch merging relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .values import Value


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid span position {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NO_SPAN = SourceSpan("<none>", 1, 1, 0)


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class LocalCall:
    """Call of an impl function or builtin from inside a located expression."""

    fname: str
    args: tuple


@dataclass(frozen=True)
class FuncRefExpr:
    name: str
    arity: int


@dataclass(frozen=True)
class TupleExpr:
    items: tuple


@dataclass(frozen=True)
class ListExpr:
    items: tuple


Expr = Union[Lit, Var, BinOp, Neg, LocalCall, FuncRefExpr, TupleExpr, ListExpr]


# ------------------------------------------------------------------- patterns


@dataclass(frozen=True)
class PLit:
    value: Value


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PPin:
    name: str


@dataclass(frozen=True)
class PWild:
    pass


@dataclass(frozen=True)
class PTuple:
    items: tuple


@dataclass(frozen=True)
class PList:
    items: tuple


Pattern = Union[PLit, PVar, PPin, PWild, PTuple, PList]


# ------------------------------------------------------- params and arguments


@dataclass(frozen=True)
class Located:
    """A function parameter located at one role."""

    role: str
    pattern: Pattern


@dataclass(frozen=True)
class FuncParam:
    """A function-valued parameter; present at every role."""

    name: str


Param = Union[Located, FuncParam]


@dataclass(frozen=True)
class LocatedArg:
    role: str
    expr: Expr


@dataclass(frozen=True)
class FuncRefArg:
    name: str
    arity: int


@dataclass(frozen=True)
class FuncVarArg:
    name: str


Arg = Union[LocatedArg, FuncRefArg, FuncVarArg]


# ----------------------------------------------------------------- statements


@dataclass(frozen=True)
class Delivery:
    sender: str
    expr: Expr
    receiver: str
    pattern: Pattern
    site: int
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class If:
    decider: str
    cond: Expr
    notify: Optional[tuple]  # None means every other role
    then: tuple
    else_: tuple
    site: int
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Checkpoint:
    body: tuple
    rescue: tuple
    site: int
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Call:
    """Choreography-level call.  ``indirect`` calls go through a function variable."""

    fname: str
    args: tuple
    indirect: bool = False
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class With:
    role: str
    pattern: Pattern
    rhs: Union[Expr, Call]
    rest: tuple
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class LocalExpr:
    role: str
    expr: Expr
    span: SourceSpan = field(default=NO_SPAN, compare=False)


Statement = Union[Delivery, If, Checkpoint, Call, With, LocalExpr]


@dataclass(frozen=True)
class ChorFunction:
    name: str
    params: tuple
    body: tuple
    span: SourceSpan = field(default=NO_SPAN, compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ChorProgram:
    roles: tuple
    functions: tuple
    file: str = "<input>"
    source: str = ""
    warnings: list = field(default_factory=list)

    def clauses(self, name: str, arity: int) -> list:
        return [f for f in self.functions if f.name == name and f.arity == arity]

    def has_function(self, name: str, arity: int) -> bool:
        return any(f.name == name and f.arity == arity for f in self.functions)

    @property
    def run(self) -> ChorFunction:
        return next(f for f in self.functions if f.name == "run")

    def source_line(self, line: int) -> str:
        lines = self.source.splitlines()
        return lines[line - 1] if 0 < line <= len(lines) else ""


def iter_statements(stmts):
    """Yield every statement in ``stmts``, recursively, in source order."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from iter_statements(s.then)
            yield from iter_statements(s.else_)
        elif isinstance(s, Checkpoint):
            yield from iter_statements(s.body)
            yield from iter_statements(s.rescue)
        elif isinstance(s, With):
            if isinstance(s.rhs, Call):
                yield s.rhs
            yield from iter_statements(s.rest)


def expr_vars(e) -> set:
    """Free variables read by an expression."""
    out: set = set()
    _expr_vars(e, out)
    return out


def _expr_vars(e, out: set) -> None:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, BinOp):
        _expr_vars(e.left, out)
        _expr_vars(e.right, out)
    elif isinstance(e, Neg):
        _expr_vars(e.operand, out)
    elif isinstance(e, (LocalCall,)):
        for a in e.args:
            _expr_vars(a, out)
    elif isinstance(e, (TupleExpr, ListExpr)):
        for a in e.items:
            _expr_vars(a, out)


def expr_calls(e) -> list:
    """(name, arity) pairs of local function calls inside an expression, in evaluation order."""
    out: dict = {}
    _expr_calls(e, out)
    return list(out)


def _expr_calls(e, out: dict) -> None:
    if isinstance(e, LocalCall):
        for a in e.args:
            _expr_calls(a, out)
        out.setdefault((e.fname, len(e.args)), None)
    elif isinstance(e, BinOp):
        _expr_calls(e.left, out)
        _expr_calls(e.right, out)
    elif isinstance(e, Neg):
        _expr_calls(e.operand, out)
    elif isinstance(e, (TupleExpr, ListExpr)):
        for a in e.items:
            _expr_calls(a, out)


def pattern_vars(p) -> tuple:
    """Return ``(bound, used)``: names a pattern binds and pinned names it reads.

    A name repeated in one pattern binds once; ``^v`` reads ``v``.
    """
    bound: set = set()
    used: set = set()
    _pattern_vars(p, bound, used)
    return frozenset(bound), frozenset(used)


def _pattern_vars(p, bound: set, used: set) -> None:
    if isinstance(p, PVar):
        bound.add(p.name)
    elif isinstance(p, PPin):
        used.add(p.name)
    elif isinstance(p, (PTuple, PList)):
        for q in p.items:
            _pattern_vars(q, bound, used)
