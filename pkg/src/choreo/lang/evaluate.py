"""Local expression evaluation and pattern matching.

Both the reference interpreter and the actor runtime evaluate located
expressions through :func:`eval_expr`; they differ only in how they route
values between roles.
"""

from __future__ import annotations

from typing import Callable, Mapping

from . import ast as A
from ..transport.codec import value_bytes
from .values import Crash, FuncRef, check_int, format_value, kind_of, truthy, values_equal

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class MissingImplFunction(Exception):
    def __init__(self, role: str, name: str, arity: int):
        super().__init__(f"role {role} has no implementation of {name}/{arity}")
        self.role = role
        self.name = name
        self.arity = arity


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def hash64(v) -> int:
    """FNV-1a 64-bit hash, returned as a signed int64.

    Strings hash their raw UTF-8 bytes; every other value hashes its
    canonical encoding.
    """
    data = v.encode("utf-8") if isinstance(v, str) else value_bytes(v)
    h = fnv1a64(data)
    return h - (1 << 64) if h >= (1 << 63) else h


def _b_str(v):
    return v if isinstance(v, str) else format_value(v)


def _b_len(v):
    if isinstance(v, (str, tuple, list)):
        return len(v)
    raise Crash(f"len/1 expects a string, tuple or list, got {kind_of(v)}")


def _b_crash_if(b):
    if truthy(b):
        raise Crash("crash_if triggered")
    return None


BUILTINS: dict = {
    ("str", 1): _b_str,
    ("len", 1): _b_len,
    ("hash64", 1): hash64,
    ("crash_if", 1): _b_crash_if,
}


def is_builtin(name: str, arity: int) -> bool:
    return (name, arity) in BUILTINS


class ImplTable:
    """The impl functions one role supplies, keyed by ``(name, arity)``."""

    def __init__(self, role: str, functions: Mapping | None = None):
        self.role = role
        self.functions: dict = dict(functions or {})

    def define(self, name: str, arity: int, fn: Callable) -> None:
        self.functions[(name, arity)] = fn

    def __contains__(self, key) -> bool:
        return key in self.functions

    def call(self, name: str, args: list):
        fn = self.functions.get((name, len(args)))
        if fn is None:
            raise MissingImplFunction(self.role, name, len(args))
        try:
            return fn(*args)
        except (Crash, MissingImplFunction):
            raise
        except RecursionError as exc:
            raise Crash(f"{name}/{len(args)} recursed too deeply") from exc
        except Exception as exc:  # foreign impl code crashed
            raise Crash(f"{name}/{len(args)} raised {type(exc).__name__}: {exc}") from exc


class ImplRegistry:
    """Role name -> :class:`ImplTable`."""

    def __init__(self, tables: Mapping | None = None):
        self.tables: dict = dict(tables or {})

    def table(self, role: str) -> ImplTable:
        if role not in self.tables:
            self.tables[role] = ImplTable(role)
        return self.tables[role]

    def missing(self, role: str, required) -> list:
        have = self.tables.get(role)
        return sorted(
            (spec for spec in required if have is None or (spec.name, spec.arity) not in have),
            key=lambda s: (s.name, s.arity),
        )

    @classmethod
    def from_python(cls, spec: Mapping) -> "ImplRegistry":
        """Build from ``{role: {"name": callable}}``; arity comes from the callable."""
        import inspect

        reg = cls()
        for role, fns in spec.items():
            t = reg.table(role)
            for name, fn in fns.items():
                t.define(name, len(inspect.signature(fn).parameters), fn)
        return reg


# ---------------------------------------------------------------- evaluation


def _arith(op: str, a, b):
    if type(a) is not int or type(b) is not int:
        raise Crash(f"bad operands for {op}: {kind_of(a)} and {kind_of(b)}")
    if op == "+":
        return check_int(a + b)
    if op == "-":
        return check_int(a - b)
    if op == "*":
        return check_int(a * b)
    if b == 0:
        raise Crash("division by zero")
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    if op == "/":
        return check_int(q)
    return a - b * q  # rem: sign follows the dividend


def _compare(op: str, a, b) -> bool:
    ok = (type(a) is int and type(b) is int) or (isinstance(a, str) and isinstance(b, str))
    if not ok:
        raise Crash(f"cannot compare {kind_of(a)} with {kind_of(b)}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def binop(op: str, a, b):
    if op in ("+", "-", "*", "/", "rem"):
        return _arith(op, a, b)
    if op in ("<", "<=", ">", ">="):
        return _compare(op, a, b)
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    if op == "<>":
        if not (isinstance(a, str) and isinstance(b, str)):
            raise Crash(f"<> expects strings, got {kind_of(a)} and {kind_of(b)}")
        return a + b
    raise ValueError(f"unknown operator {op}")


def eval_expr(e, env: Mapping, impl: ImplTable | None):
    """Evaluate ``e`` strictly left to right against ``env``."""
    if isinstance(e, A.Lit):
        return e.value
    if isinstance(e, A.Var):
        try:
            return env[e.name]
        except KeyError:
            raise Crash(f'undefined variable "{e.name}"') from None
    if isinstance(e, A.BinOp):
        left = eval_expr(e.left, env, impl)
        right = eval_expr(e.right, env, impl)
        return binop(e.op, left, right)
    if isinstance(e, A.Neg):
        v = eval_expr(e.operand, env, impl)
        if type(v) is not int:
            raise Crash(f"cannot negate {kind_of(v)}")
        return check_int(-v)
    if isinstance(e, A.LocalCall):
        args = [eval_expr(a, env, impl) for a in e.args]
        builtin = BUILTINS.get((e.fname, len(args)))
        if builtin is not None:
            return builtin(*args)
        if impl is None:
            raise MissingImplFunction("?", e.fname, len(args))
        return impl.call(e.fname, args)
    if isinstance(e, A.FuncRefExpr):
        return FuncRef(e.name, e.arity)
    if isinstance(e, A.TupleExpr):
        return tuple(eval_expr(x, env, impl) for x in e.items)
    if isinstance(e, A.ListExpr):
        return [eval_expr(x, env, impl) for x in e.items]
    raise TypeError(f"not an expression: {e!r}")


def match_pattern(p, v, env: Mapping):
    """Match ``v`` against ``p``; return the new bindings, or ``None`` on mismatch.

    Pinned variables read ``env``; a name repeated inside ``p`` must bind
    equal values each time.
    """
    out: dict = {}
    return out if _match(p, v, env, out) else None


def _match(p, v, env, out: dict) -> bool:
    if isinstance(p, A.PWild):
        return True
    if isinstance(p, A.PVar):
        if p.name in out:
            return values_equal(out[p.name], v)
        out[p.name] = v
        return True
    if isinstance(p, A.PPin):
        if p.name not in env:
            raise Crash(f'pinned variable "{p.name}" is unbound')
        return values_equal(env[p.name], v)
    if isinstance(p, A.PLit):
        return values_equal(p.value, v)
    if isinstance(p, A.PTuple):
        return (isinstance(v, tuple) and len(v) == len(p.items)
                and all(_match(q, x, env, out) for q, x in zip(p.items, v)))
    if isinstance(p, A.PList):
        return (isinstance(v, list) and len(v) == len(p.items)
                and all(_match(q, x, env, out) for q, x in zip(p.items, v)))
    raise TypeError(f"not a pattern: {p!r}")


def bind(p, v, env: dict, span=None) -> None:
    """Match and update ``env`` in place; a mismatch is a crash."""
    got = match_pattern(p, v, env)
    if got is None:
        raise Crash(f"no match of right hand side value: {format_value(v)}", span)
    env.update(got)
