"""Endpoint IR: handler blocks, instructions and continuation tokens."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..lang.ast import SourceSpan

# variable that carries a received knowledge-of-choice bit into BranchOnChoice
CHOICE_VAR = "%choice"


@dataclass(frozen=True, order=True)
class ContinuationToken:
    fname: str
    arity: int
    role: str
    ordinal: int

    def __str__(self) -> str:
        return f"{self.fname}/{self.arity}@{self.role}#{self.ordinal}"


@dataclass(frozen=True, order=True)
class FunctionSpec:
    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


# ------------------------------------------------------------- entry kinds


@dataclass(frozen=True)
class Start:
    """Function-clause entry; ``params`` holds this role's pattern per position."""

    params: tuple


@dataclass(frozen=True)
class AwaitRecv:
    site: int
    sender: str
    pattern: object


@dataclass(frozen=True)
class AwaitChoice:
    site: int
    decider: str


@dataclass(frozen=True)
class AwaitBarrier:
    site: int


@dataclass(frozen=True)
class ReturnLanding:
    pattern: object  # None discards the returned value


@dataclass(frozen=True)
class Continue:
    """Plain jump target: branch arm or join point."""


@dataclass(frozen=True)
class Rescue:
    site: int


WAITING_ENTRIES = (AwaitRecv, AwaitChoice, AwaitBarrier)


# ------------------------------------------------------------ instructions


@dataclass(frozen=True)
class Eval:
    target: Optional[str]
    expr: object


@dataclass(frozen=True)
class Bind:
    pattern: object
    expr: object


@dataclass(frozen=True)
class Send:
    site: int
    dest: str
    expr: object


@dataclass(frozen=True)
class SendChoice:
    site: int
    dests: tuple
    cond_var: str


@dataclass(frozen=True)
class EnterCheckpoint:
    site: int
    rescue: ContinuationToken
    exit: ContinuationToken


# terminators


@dataclass(frozen=True)
class Jump:
    target: ContinuationToken


@dataclass(frozen=True)
class BranchLocal:
    cond: object
    then: ContinuationToken
    else_: ContinuationToken


@dataclass(frozen=True)
class BranchOnChoice:
    site: int
    then: ContinuationToken
    else_: ContinuationToken


@dataclass(frozen=True)
class CallFn:
    """Call a choreography function; ``ret=None`` is a tail call that pushes no frame."""

    fname: str
    arity: int
    args: tuple
    ret: Optional[ContinuationToken]


@dataclass(frozen=True)
class CallIndirect:
    funcvar: str
    args: tuple
    ret: Optional[ContinuationToken]


@dataclass(frozen=True)
class Return:
    expr: object


@dataclass(frozen=True)
class FinishRun:
    expr: object


@dataclass(frozen=True)
class ExitCheckpoint:
    site: int
    exit: ContinuationToken


TERMINATORS = (Jump, BranchLocal, BranchOnChoice, CallFn, CallIndirect, Return, FinishRun,
               ExitCheckpoint)


def successors(term) -> tuple:
    if isinstance(term, Jump):
        return (term.target,)
    if isinstance(term, (BranchLocal, BranchOnChoice)):
        return (term.then, term.else_)
    if isinstance(term, (CallFn, CallIndirect)):
        return () if term.ret is None else (term.ret,)
    if isinstance(term, ExitCheckpoint):
        return (term.exit,)
    return ()


def block_successors(body) -> tuple:
    """Successor tokens of a block: terminator targets, then rescue targets."""
    succ = list(successors(body[-1]))
    for ins in body:
        if isinstance(ins, EnterCheckpoint):
            succ.append(ins.rescue)
    return tuple(succ)


@dataclass
class HandlerBlock:
    token: ContinuationToken
    entry: object
    body: list
    live_in: frozenset = frozenset()
    live_out: frozenset = frozenset()

    @property
    def terminator(self):
        return self.body[-1]


@dataclass(frozen=True)
class SiteInfo:
    kind: str  # "delivery" or "choice"
    sender: str
    receivers: tuple
    span: SourceSpan = field(compare=False)


@dataclass
class EndpointProgram:
    role: str
    blocks: dict  # ContinuationToken -> HandlerBlock, in ordinal order
    entry: ContinuationToken
    functions: dict  # (name, arity) -> tuple of clause entry tokens
    send_sites: dict  # site -> tuple of SiteInfo
    required: tuple  # FunctionSpecs in order of first use

    def block(self, token: ContinuationToken) -> HandlerBlock:
        return self.blocks[token]
