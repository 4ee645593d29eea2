"""Reference interpreter: run a choreography as one sequential global program.

This is the oracle for the distributed runtime.  It never looks at
projections: every role's variables live in one map per role, deliveries
are assignments, and a checkpoint is a snapshot of all maps taken before
the body runs.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field

from . import ast as A
from .evaluate import ImplRegistry, bind, eval_expr, match_pattern
from .values import UNIT, Crash, FuncRef, format_value, truthy


class SessionAborted(Exception):
    """A failure no checkpoint can absorb: crash outside a checkpoint or inside a rescue."""

    def __init__(self, reason: str, role: str | None = None):
        super().__init__(reason if role is None else f"{role}: {reason}")
        self.reason = reason
        self.role = role


@dataclass
class GlobalResult:
    values: dict  # role -> run result
    rescue_count: int = 0
    trace: list = field(default_factory=list)


class _Crashed(Exception):
    def __init__(self, role: str, crash: Crash):
        super().__init__(f"{role}: {crash.reason}")
        self.role = role
        self.crash = crash


def call_deep(fn, *args, stack_mb: int = 512, recursion: int = 1_000_000):
    """Run ``fn`` on a thread with a large stack so deep choreography recursion fits."""
    box: dict = {}

    def target():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, recursion))
        try:
            box["value"] = fn(*args)
        except BaseException as exc:  # re-raised on the caller's thread
            box["error"] = exc
        finally:
            sys.setrecursionlimit(old)

    prev = threading.stack_size()
    threading.stack_size(stack_mb * 1024 * 1024)
    try:
        t = threading.Thread(target=target, name="choreo-deep")
        t.start()
    finally:
        threading.stack_size(prev)
    t.join()
    if "error" in box:
        raise box["error"]
    return box["value"]


class _Interp:
    def __init__(self, prog: A.ChorProgram, impls: ImplRegistry):
        self.prog = prog
        self.impls = impls
        self.rescues = 0
        self.trace: list = []

    def ev(self, env: dict, role: str, e):
        try:
            return eval_expr(e, env[role], self.impls.table(role))
        except Crash as c:
            raise _Crashed(role, c) from None

    def bind(self, env: dict, role: str, p, v, span) -> None:
        try:
            bind(p, v, env[role], span)
        except Crash as c:
            raise _Crashed(role, c) from None

    def nil_values(self) -> dict:
        return {r: None for r in self.prog.roles}

    # returns role -> value of the statement list
    def stmts(self, stmts, env: dict) -> dict:
        vals = self.nil_values()
        for s in stmts:
            vals = self.stmt(s, env)
        return vals

    def stmt(self, s, env: dict) -> dict:
        vals = self.nil_values()
        if isinstance(s, A.Delivery):
            v = self.ev(env, s.sender, s.expr)
            self.trace.append(("deliver", s.site, s.sender, s.receiver, v))
            self.bind(env, s.receiver, s.pattern, v, s.span)
            return vals
        if isinstance(s, A.LocalExpr):
            vals[s.role] = self.ev(env, s.role, s.expr)
            return vals
        if isinstance(s, A.If):
            c = truthy(self.ev(env, s.decider, s.cond))
            self.trace.append(("choice", s.site, s.decider, c))
            return self.stmts(s.then if c else s.else_, env)
        if isinstance(s, A.Checkpoint):
            return self.checkpoint(s, env)
        if isinstance(s, A.With):
            if isinstance(s.rhs, A.Call):
                got = self.call(s.rhs, env)
                self.bind(env, s.role, s.pattern, got[s.role], s.span)
            else:
                self.bind(env, s.role, s.pattern, self.ev(env, s.role, s.rhs), s.span)
            return self.stmts(s.rest, env)
        if isinstance(s, A.Call):
            return self.call(s, env)
        raise TypeError(f"not a statement: {s!r}")

    def checkpoint(self, s: A.Checkpoint, env: dict) -> dict:
        snapshot = {r: dict(vs) for r, vs in env.items()}
        self.trace.append(("ckpt_enter", s.site))
        try:
            vals = self.stmts(s.body, env)
        except _Crashed as exc:
            self.rescues += 1
            self.trace.append(("rescue", s.site, exc.role, exc.crash.reason))
            for r in env:
                env[r] = dict(snapshot[r])
            try:
                vals = self.stmts(s.rescue, env)
            except _Crashed as again:
                raise SessionAborted(f"crash inside rescue: {again.crash.reason}", again.role) from None
        self.trace.append(("ckpt_exit", s.site))
        return vals

    def call(self, c: A.Call, env: dict) -> dict:
        args: list = []  # (role or None, value)
        for a in c.args:
            if isinstance(a, A.LocatedArg):
                args.append((a.role, self.ev(env, a.role, a.expr)))
            elif isinstance(a, A.FuncRefArg):
                args.append((None, FuncRef(a.name, a.arity)))
            else:
                args.append((None, env[self.prog.roles[0]][a.name]))
        if c.indirect:
            ref = env[self.prog.roles[0]][c.fname]
            if not isinstance(ref, FuncRef) or ref.arity != len(args):
                raise _Crashed(self.prog.roles[0], Crash(f"{c.fname} is not a function of arity {len(args)}"))
            name = ref.name
        else:
            name = c.fname
        return self.invoke(name, args, c.span)

    def invoke(self, name: str, args: list, span=A.NO_SPAN) -> dict:
        for f in self.prog.clauses(name, len(args)):
            fenv = {r: {} for r in self.prog.roles}
            if self._bind_params(f, args, fenv):
                return self.stmts(f.body, fenv)
        shown = ", ".join(format_value(v) for _, v in args)
        role = next((r for r, _ in args if r is not None), self.prog.roles[0])
        raise _Crashed(role, Crash(f"no clause of {name}/{len(args)} matches ({shown})", span))

    def _bind_params(self, f: A.ChorFunction, args: list, fenv: dict) -> bool:
        for p, (_, v) in zip(f.params, args):
            if isinstance(p, A.Located):
                try:
                    got = match_pattern(p.pattern, v, fenv[p.role])
                except Crash:
                    got = None
                if got is None:
                    return False
                fenv[p.role].update(got)
            else:
                for r in self.prog.roles:
                    fenv[r][p.name] = v
        return True


def eval_global(prog: A.ChorProgram, impls: ImplRegistry | None = None, args=()) -> GlobalResult:
    """Evaluate ``run`` sequentially; return every role's run value.

    Raises :class:`SessionAborted` when a crash escapes every checkpoint.
    """
    impls = impls or ImplRegistry()
    run = prog.run
    if len(args) != run.arity:
        raise ValueError(f"run/{run.arity} expects {run.arity} arguments, got {len(args)}")
    interp = _Interp(prog, impls)

    def go():
        located = [(p.role if isinstance(p, A.Located) else None, v) for p, v in zip(run.params, args)]
        try:
            vals = interp.invoke("run", located)
        except _Crashed as exc:
            raise SessionAborted(f"crash outside checkpoint: {exc.crash.reason}", exc.role) from None
        return GlobalResult(vals, interp.rescues, interp.trace)

    return call_deep(go)


__all__ = ["GlobalResult", "SessionAborted", "eval_global", "call_deep", "UNIT"]
