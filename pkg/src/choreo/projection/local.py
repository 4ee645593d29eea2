"""Role-local views of a choreography, and merging of conditional branches.

A local view is the sequence of actions one role performs for a statement
list.  Views carry no source spans, so two branches a role cannot tell apart
compare equal.  Knowledge-of-choice checking and projection both go through
:func:`local_view`, which keeps the two in agreement by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..lang import ast as A
from ..lang.values import UNIT


@dataclass(frozen=True)
class LSend:
    site: int
    dest: str
    expr: object


@dataclass(frozen=True)
class LRecv:
    site: int
    src: str
    pattern: object


@dataclass(frozen=True)
class LEval:
    expr: object


@dataclass(frozen=True)
class LNil:
    """A tail statement that yields nil for this role."""


@dataclass(frozen=True)
class LBind:
    pattern: object
    expr: object


@dataclass(frozen=True)
class LChoose:
    site: int
    cond: object
    dests: tuple
    then: tuple
    else_: tuple


@dataclass(frozen=True)
class LOffer:
    site: int
    decider: str
    then: tuple
    else_: tuple


@dataclass(frozen=True)
class LCheckpoint:
    site: int
    body: tuple
    rescue: tuple


@dataclass(frozen=True)
class LCall:
    fname: str
    arity: int
    args: tuple
    bind: object  # pattern bound at this role, or None
    indirect: bool = False


class MergeError(Exception):
    """A role that is not notified behaves differently in the two branches of an ``if``."""

    def __init__(self, role: str, span: A.SourceSpan, left=None, right=None):
        self.role = role
        self.span = span
        self.left = left
        self.right = right
        super().__init__(f"{span.file}:{span.line}: Branches differ for actor {role}; "
                         f"`if` block needs to notify")


def _first_difference(a: tuple, b: tuple) -> tuple:
    for x, y in zip(a, b):
        if x != y:
            return x, y
    n = min(len(a), len(b))
    return (a[n] if n < len(a) else None), (b[n] if n < len(b) else None)


def merge_projections(a: tuple, b: tuple, role: str = "?", span: A.SourceSpan = A.NO_SPAN) -> tuple:
    """Return ``a`` when the two branch views are identical, else raise :class:`MergeError`."""
    if a == b:
        return a
    left, right = _first_difference(a, b)
    raise MergeError(role, span, left, right)


def call_args_for(call: A.Call, role: str) -> tuple:
    out = []
    for arg in call.args:
        if isinstance(arg, A.LocatedArg):
            out.append(arg.expr if arg.role == role else A.Lit(UNIT))
        elif isinstance(arg, A.FuncRefArg):
            out.append(A.FuncRefExpr(arg.name, arg.arity))
        else:
            out.append(A.Var(arg.name))
    return tuple(out)


def _lcall(call: A.Call, role: str, bind) -> LCall:
    return LCall(call.fname, len(call.args), call_args_for(call, role), bind, call.indirect)


class _Viewer:
    def __init__(self, roles: tuple, role: str, errors: list | None):
        self.roles = roles
        self.role = role
        self.errors = errors

    def view(self, stmts, tail: bool) -> tuple:
        out: list = []
        n = len(stmts)
        for i, s in enumerate(stmts):
            last = tail and i == n - 1
            items = self.stmt(s, last)
            if last and not items:
                items = [LNil()]
            out.extend(items)
        return tuple(out)

    def stmt(self, s, last: bool) -> list:
        r = self.role
        if isinstance(s, A.Delivery):
            if s.sender == r:
                return [LSend(s.site, s.receiver, s.expr)]
            if s.receiver == r:
                return [LRecv(s.site, s.sender, s.pattern)]
            return []
        if isinstance(s, A.LocalExpr):
            return [LEval(s.expr)] if s.role == r else []
        if isinstance(s, A.If):
            then = self.view(s.then, last)
            else_ = self.view(s.else_, last)
            notified = s.notify if s.notify is not None else tuple(x for x in self.roles if x != s.decider)
            if s.decider == r:
                dests = tuple(x for x in self.roles if x in notified)
                return [LChoose(s.site, s.cond, dests, then, else_)]
            if r in notified:
                return [LOffer(s.site, s.decider, then, else_)]
            if then != else_:
                err = MergeError(r, s.span, *_first_difference(then, else_))
                if self.errors is None:
                    raise err
                self.errors.append(err)
            return list(then)
        if isinstance(s, A.Checkpoint):
            return [LCheckpoint(s.site, self.view(s.body, last), self.view(s.rescue, last))]
        if isinstance(s, A.With):
            head: list = []
            if isinstance(s.rhs, A.Call):
                head = [_lcall(s.rhs, r, s.pattern if s.role == r else None)]
            elif s.role == r:
                head = [LBind(s.pattern, s.rhs)]
            return head + list(self.view(s.rest, last))
        if isinstance(s, A.Call):
            return [_lcall(s, r, None)]
        raise TypeError(f"not a statement: {s!r}")


def local_view(prog_roles: tuple, stmts, role: str, tail: bool = True, errors: list | None = None) -> tuple:
    """Project ``stmts`` to ``role``'s local actions.

    With ``errors=None`` a failed merge raises :class:`MergeError`; otherwise
    errors are appended and the then-branch view is used.
    """
    return _Viewer(prog_roles, role, errors).view(stmts, tail)
