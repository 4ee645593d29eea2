"""Checkpoint snapshots and the deltas the monitor stores between them."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..lang.values import values_equal
from ..runtime.stack import Stack

_MISSING = object()


@dataclass(frozen=True)
class Snapshot:
    """An actor's state at checkpoint entry, before the checkpoint frame is pushed."""

    stack: Stack
    vars: dict = field(hash=False)
    seqs: dict = field(hash=False, default_factory=dict)


EMPTY_SNAPSHOT = Snapshot(Stack.EMPTY, {}, {})


@dataclass(frozen=True)
class StackDelta:
    base_len: int
    added: tuple  # frames above the shared prefix, bottom to top
    vars_changed: dict = field(hash=False)
    vars_removed: tuple = ()
    seqs: dict = field(hash=False, default_factory=dict)

    @property
    def frame_count(self) -> int:
        return len(self.added)


def _shared_prefix(a: Stack, b: Stack) -> tuple:
    """Return ``(prefix_depth, frames of b above it)``.

    Identical nodes end the walk immediately; structurally equal frames at
    the same depth are also treated as shared.
    """
    added = []
    while b.depth > a.depth:
        added.append(b.frame)
        b = b.below
    while a.depth > b.depth:
        a = a.below
    pending = []
    while a is not b:
        if a.frame == b.frame:
            pending.append(b.frame)
        else:
            added.extend(pending)
            pending.clear()
            added.append(b.frame)
        a, b = a.below, b.below
    depth = b.depth + len(pending)
    added.reverse()
    return depth, tuple(added)


def compute_delta(prev: Snapshot, cur: Snapshot) -> StackDelta:
    base_len, added = _shared_prefix(prev.stack, cur.stack)
    changed = {k: v for k, v in cur.vars.items()
               if prev.vars.get(k, _MISSING) is _MISSING or not _same(prev.vars[k], v)}
    removed = tuple(sorted(k for k in prev.vars if k not in cur.vars))
    return StackDelta(base_len, added, changed, removed, dict(cur.seqs))


def _same(a, b) -> bool:
    return a is b or values_equal(a, b)


def apply_delta(prev: Snapshot, delta: StackDelta) -> Snapshot:
    if delta.base_len > prev.stack.depth:
        raise ValueError(f"delta base {delta.base_len} exceeds stack depth {prev.stack.depth}")
    stack = Stack.from_list(delta.added, prev.stack.truncate(delta.base_len))
    vars_ = {k: v for k, v in prev.vars.items() if k not in delta.vars_removed}
    vars_.update(delta.vars_changed)
    return Snapshot(stack, vars_, dict(delta.seqs))


def full_delta(cur: Snapshot) -> StackDelta:
    """A delta against the empty snapshot: the whole stack is stored."""
    return StackDelta(0, tuple(cur.stack.to_list()), dict(cur.vars), (), dict(cur.seqs))
