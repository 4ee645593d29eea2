"""Persistent control stacks and the frames they hold.

Stacks are immutable linked nodes: a push shares everything below it, so a
checkpoint can keep a reference to an actor's stack in O(1) and later
compare it with a newer stack by node identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from ..projection.ir import ContinuationToken


@dataclass(frozen=True, eq=True)
class ReturnFrame:
    ret: ContinuationToken
    saved_vars: dict = field(hash=False)


@dataclass(frozen=True, eq=True)
class CheckpointFrame:
    instance: tuple  # (site, seq)
    saved_vars: dict = field(hash=False)
    saved_seqs: dict = field(hash=False)
    rescue: ContinuationToken = None
    exit: ContinuationToken = None


class Stack:
    """An immutable stack; ``Stack.EMPTY`` is the shared empty stack."""

    __slots__ = ("frame", "below", "depth")
    EMPTY: "Stack"

    def __init__(self, frame=None, below: Optional["Stack"] = None):
        self.frame = frame
        self.below = below
        self.depth = 0 if below is None else below.depth + 1

    def push(self, frame) -> "Stack":
        return Stack(frame, self)

    def pop(self) -> tuple:
        if self.below is None:
            raise IndexError("pop from empty stack")
        return self.frame, self.below

    @property
    def top(self):
        if self.below is None:
            raise IndexError("empty stack has no top")
        return self.frame

    def __len__(self) -> int:
        return self.depth

    def __bool__(self) -> bool:
        return self.depth > 0

    def __iter__(self) -> Iterator:
        """Frames from top to bottom."""
        node = self
        while node.below is not None:
            yield node.frame
            node = node.below

    def to_list(self) -> list:
        """Frames from bottom to top."""
        out = list(self)
        out.reverse()
        return out

    def truncate(self, depth: int) -> "Stack":
        node = self
        while node.depth > depth:
            node = node.below
        return node

    @classmethod
    def from_list(cls, frames, base: Optional["Stack"] = None) -> "Stack":
        node = base if base is not None else cls.EMPTY
        for f in frames:
            node = node.push(f)
        return node

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Stack) or self.depth != other.depth:
            return False
        a, b = self, other
        while a is not b:
            if a.frame != b.frame:
                return False
            a, b = a.below, b.below
        return True

    __hash__ = None

    def __repr__(self) -> str:
        return f"Stack({self.to_list()!r})"


Stack.EMPTY = Stack()
