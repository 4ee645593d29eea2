"""Static checks: located scope and knowledge of choice.

Scope errors rule out deadlocks such as a role forwarding a value it has
not yet received; knowledge-of-choice errors rule out roles that cannot
tell which branch of an ``if`` they are in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A


@dataclass(frozen=True)
class CheckError:
    kind: str  # "scope" or "koc"
    message: str
    span: A.SourceSpan
    role: str
    where: str  # "Role.fname/arity"

    def __str__(self) -> str:
        return f"{self.span.file}:{self.span.line}: {self.message}"


class CheckFailed(Exception):
    def __init__(self, errors: list):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


_LOCATED_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\.(\([^)]*\)|[A-Za-z_{][^ ~]*)?")


def render_error(prog: A.ChorProgram, err: CheckError) -> str:
    """Render an error with the offending source line and a caret underline."""
    line = prog.source_line(err.span.line)
    col = err.span.column - 1
    m = _LOCATED_RE.match(line, col)
    width = max(1, (m.end() - col) if m else err.span.length)
    file = err.span.file.rsplit("/", 1)[-1]
    return "\n".join([
        f"ERROR: {err.message}",
        "|",
        f"| {line.strip()}",
        "| " + " " * (col - (len(line) - len(line.lstrip()))) + "^" * width,
        "|",
        f"|-- {file}:{err.span.line} {err.where}",
    ])


class _Scope:
    def __init__(self, prog: A.ChorProgram, f: A.ChorFunction, errors: list):
        self.prog = prog
        self.f = f
        self.errors = errors
        self.fparams = {p.name for p in f.params if isinstance(p, A.FuncParam)}

    def err(self, message: str, span, role: str) -> None:
        e = CheckError("scope", message, span, role, f"{role}.{self.f.name}/{self.f.arity}")
        if e not in self.errors:
            self.errors.append(e)

    def need(self, env: dict, role: str, e, span) -> None:
        for v in sorted(A.expr_vars(e)):
            if v in env[role]:
                continue
            owner = next((r for r in self.prog.roles if r != role and v in env[r]), None)
            if owner is not None:
                self.err(f'variable "{v}" is located at {owner}, not {role}', span, role)
            else:
                self.err(f'undefined variable "{v}"', span, role)

    def bind(self, env: dict, role: str, pattern, span) -> dict:
        bound, used = A.pattern_vars(pattern)
        for v in sorted(used):
            if v not in env[role]:
                self.err(f'undefined variable "{v}"', span, role)
        out = dict(env)
        out[role] = env[role] | bound
        return out

    def stmts(self, stmts, env: dict) -> dict:
        for s in stmts:
            env = self.stmt(s, env)
        return env

    def stmt(self, s, env: dict) -> dict:
        if isinstance(s, A.Delivery):
            self.need(env, s.sender, s.expr, s.span)
            return self.bind(env, s.receiver, s.pattern, s.span)
        if isinstance(s, A.LocalExpr):
            self.need(env, s.role, s.expr, s.span)
            return env
        if isinstance(s, A.If):
            self.need(env, s.decider, s.cond, s.span)
            self.stmts(s.then, env)
            self.stmts(s.else_, env)
            return env
        if isinstance(s, A.Checkpoint):
            self.stmts(s.body, env)
            self.stmts(s.rescue, env)
            return env
        if isinstance(s, A.With):
            if isinstance(s.rhs, A.Call):
                self.call(s.rhs, env)
            else:
                self.need(env, s.role, s.rhs, s.span)
            self.stmts(s.rest, self.bind(env, s.role, s.pattern, s.span))
            return env
        if isinstance(s, A.Call):
            self.call(s, env)
            return env
        raise TypeError(f"not a statement: {s!r}")

    def call(self, c: A.Call, env: dict) -> None:
        first_role = next((a.role for a in c.args if isinstance(a, A.LocatedArg)),
                          self.prog.roles[0])
        if c.indirect:
            if c.fname not in self.fparams:
                self.err(f"{c.fname} is not a function parameter", c.span, first_role)
            params = None
        else:
            clauses = self.prog.clauses(c.fname, len(c.args))
            if not clauses:
                self.err(f"undefined function {c.fname}/{len(c.args)}", c.span, first_role)
                return
            params = clauses[0].params
        for i, a in enumerate(c.args):
            p = params[i] if params is not None else None
            if isinstance(a, A.LocatedArg):
                self.need(env, a.role, a.expr, c.span)
                if isinstance(p, A.FuncParam):
                    self.err(f"argument {i + 1} of {c.fname} must be a function, "
                             f"got a value located at {a.role}", c.span, a.role)
                elif isinstance(p, A.Located) and p.role != a.role:
                    self.err(f"argument {i + 1} of {c.fname} is located at {a.role} but the "
                             f"parameter expects {p.role}", c.span, a.role)
            else:
                if isinstance(a, A.FuncRefArg) and not self.prog.has_function(a.name, a.arity):
                    self.err(f"undefined function {a.name}/{a.arity}", c.span, first_role)
                if isinstance(a, A.FuncVarArg) and a.name not in self.fparams:
                    self.err(f"{a.name} is not a function parameter", c.span, first_role)
                if isinstance(p, A.Located):
                    self.err(f"argument {i + 1} of {c.fname} must be located at {p.role}",
                             c.span, p.role)


def check_located_scope(prog: A.ChorProgram) -> list:
    """Every variable use must be bound earlier, at the same role."""
    errors: list = []
    for f in prog.functions:
        env = {r: frozenset() for r in prog.roles}
        for p in f.params:
            if isinstance(p, A.Located):
                env[p.role] = env[p.role] | A.pattern_vars(p.pattern)[0]
        _Scope(prog, f, errors).stmts(f.body, env)
    return errors


def check_knowledge_of_choice(prog: A.ChorProgram) -> list:
    """Every role outside an ``if``'s notify list must act identically in both branches."""
    from ..projection.local import local_view

    errors: list = []
    for f in prog.functions:
        for role in prog.roles:
            found: list = []
            local_view(prog.roles, f.body, role, tail=True, errors=found)
            for m in found:
                e = CheckError("koc", f"Branches differ for actor {m.role}; `if` block needs to notify",
                               m.span, m.role, f"{m.role}.{f.name}/{f.arity}")
                if e not in errors:
                    errors.append(e)
    errors.sort(key=lambda e: (e.span.line, e.span.column, e.role))
    return errors


def check_program(prog: A.ChorProgram) -> list:
    """Scope errors first (in source order), then knowledge-of-choice errors."""
    return check_located_scope(prog) + check_knowledge_of_choice(prog)
