"""Backward liveness over handler blocks.

``live_in`` of a block is what a frame or checkpoint must save to resume at
that block; it is computed as a worklist fixpoint so loops through calls
and rescues converge.
"""

from __future__ import annotations

from ..lang import ast as A
from . import ir


def _evars(e) -> set:
    return A.expr_vars(e)


def _entry_defs_uses(entry) -> tuple:
    if isinstance(entry, ir.Start):
        bound, used = set(), set()
        for p in entry.params:
            b, u = A.pattern_vars(p)
            bound |= b
            used |= u
        return bound, used
    if isinstance(entry, (ir.AwaitRecv, ir.ReturnLanding)):
        if entry.pattern is None:
            return set(), set()
        b, u = A.pattern_vars(entry.pattern)
        return set(b), set(u)
    if isinstance(entry, ir.AwaitChoice):
        return {ir.CHOICE_VAR}, set()
    return set(), set()


def _transfer(block: ir.HandlerBlock, live_out: set, live_in_of) -> set:
    live = set(live_out)
    for ins in reversed(block.body):
        if isinstance(ins, ir.Eval):
            live.discard(ins.target)
            live |= _evars(ins.expr)
        elif isinstance(ins, ir.Bind):
            b, u = A.pattern_vars(ins.pattern)
            live -= b
            live |= u | _evars(ins.expr)
        elif isinstance(ins, ir.Send):
            live |= _evars(ins.expr)
        elif isinstance(ins, ir.SendChoice):
            live.add(ins.cond_var)
        elif isinstance(ins, ir.EnterCheckpoint):
            live |= live_in_of(ins.rescue)
        elif isinstance(ins, ir.BranchLocal):
            live |= _evars(ins.cond)
        elif isinstance(ins, ir.BranchOnChoice):
            live.add(ir.CHOICE_VAR)
        elif isinstance(ins, (ir.CallFn, ir.CallIndirect)):
            for a in ins.args:
                live |= _evars(a)
            if isinstance(ins, ir.CallIndirect):
                live.add(ins.funcvar)
        elif isinstance(ins, (ir.Return, ir.FinishRun)):
            live |= _evars(ins.expr)
    defs, uses = _entry_defs_uses(block.entry)
    return (live - defs) | uses


def annotate(blocks: dict) -> None:
    """Fill ``live_in``/``live_out`` on every block in place."""
    live_in = {t: set() for t in blocks}
    preds: dict = {t: set() for t in blocks}
    for t, b in blocks.items():
        for s in ir.block_successors(b.body):
            preds[s].add(t)
    work = list(blocks)
    pending = set(work)
    while work:
        t = work.pop()
        pending.discard(t)
        b = blocks[t]
        out = set()
        for s in ir.successors(b.terminator):
            out |= live_in[s]
        new = _transfer(b, out, lambda tok: live_in[tok])
        if new != live_in[t]:
            live_in[t] = new
            for p in preds[t]:
                if p not in pending:
                    pending.add(p)
                    work.append(p)
    for t, b in blocks.items():
        out = set()
        for s in ir.successors(b.terminator):
            out |= live_in[s]
        b.live_in = frozenset(live_in[t])
        b.live_out = frozenset(out)
