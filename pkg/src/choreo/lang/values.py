"""Runtime values shared by the reference interpreter and the actor runtime.

The universe is closed: nil, booleans, 64-bit signed integers, strings,
atoms, tuples, lists and function references.  Python representations:

    nil      -> None
    bool     -> bool
    int      -> int (range-checked to int64)
    string   -> str
    atom     -> Atom
    tuple    -> tuple
    list     -> list
    funcref  -> FuncRef
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class Atom:
    name: str

    def __repr__(self) -> str:
        return f":{self.name}"


@dataclass(frozen=True)
class FuncRef:
    """A first-class reference to a choreography function, ``@name/arity``."""

    name: str
    arity: int

    def __repr__(self) -> str:
        return f"@{self.name}/{self.arity}"


Value = Union[None, bool, int, str, Atom, tuple, list, FuncRef]

# dummy passed for argument positions located at other roles
UNIT = Atom("unit")


class Crash(Exception):
    """An evaluation error inside actor-local code.

    Crashes are the only failure mode the recovery protocol handles: division
    by zero, type errors, pattern-match failures and ``crash_if(true)``.
    """

    def __init__(self, reason: str, span=None):
        super().__init__(reason)
        self.reason = reason
        self.span = span


def kind_of(v: Any) -> str:
    if v is None:
        return "nil"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, str):
        return "string"
    if isinstance(v, Atom):
        return "atom"
    if isinstance(v, tuple):
        return "tuple"
    if isinstance(v, list):
        return "list"
    if isinstance(v, FuncRef):
        return "funcref"
    raise TypeError(f"not a choreography value: {v!r}")


def is_value(v: Any) -> bool:
    try:
        kind_of(v)
    except TypeError:
        return False
    if isinstance(v, (tuple, list)):
        return all(is_value(x) for x in v)
    if isinstance(v, int) and not isinstance(v, bool):
        return INT64_MIN <= v <= INT64_MAX
    return True


def values_equal(a: Any, b: Any) -> bool:
    # Python's == conflates True/1 and tuple/list; compare kinds first
    if type(a) is not type(b):
        return False
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return a == b


def truthy(v: Any) -> bool:
    return not (v is None or v is False)


def check_int(n: int) -> int:
    if n < INT64_MIN or n > INT64_MAX:
        raise Crash("integer overflow")
    return n


def format_value(v: Any) -> str:
    """Render a value in the surface syntax (``{:ok, 1}``, ``"hi"``, ``nil``)."""
    if v is None:
        return "nil"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    if isinstance(v, Atom):
        return f":{v.name}"
    if isinstance(v, tuple):
        return "{" + ", ".join(format_value(x) for x in v) + "}"
    if isinstance(v, list):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    if isinstance(v, FuncRef):
        return f"@{v.name}/{v.arity}"
    raise TypeError(f"not a choreography value: {v!r}")
