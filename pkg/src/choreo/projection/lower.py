"""Endpoint projection: lower a role's local views into handler blocks.

A block starts at a point where the role may have to wait (a receive, a
choice, a barrier, a return from a call) or at a branch target, and runs
without blocking up to its terminator.  Block ordinals are assigned in DFS
preorder from each clause's entry, continuing across clauses of the same
function, so listings are stable under unrelated edits elsewhere.
"""

from __future__ import annotations

import dataclasses

from ..lang import ast as A
from ..lang.evaluate import is_builtin
from . import ir
from .ir import ContinuationToken as Tok
from .local import (LBind, LCall, LCheckpoint, LChoose, LEval, LNil, LOffer, LRecv, LSend,
                    local_view)

RETURN = ("return",)
FINISH = ("finish",)

_VALUE_ITEMS = (LEval, LNil, LChoose, LOffer, LCheckpoint)


def _yields_value(item) -> bool:
    return isinstance(item, _VALUE_ITEMS) or (isinstance(item, LCall) and item.bind is None)


class _Builder:
    """Accumulates blocks for one function clause with provisional ordinals."""

    def __init__(self, fname: str, arity: int, role: str):
        self.fname = fname
        self.arity = arity
        self.role = role
        self.blocks: dict = {}
        self.order: list = []
        self.cur = None  # token of the open block
        self.counter = 0

    def new_token(self) -> Tok:
        self.counter += 1
        return Tok(self.fname, self.arity, self.role, -self.counter)

    def open(self, tok: Tok, entry) -> None:
        self.blocks[tok] = ir.HandlerBlock(tok, entry, [])
        self.order.append(tok)
        self.cur = tok

    def emit(self, ins) -> None:
        self.blocks[self.cur].body.append(ins)

    def terminate(self, term) -> None:
        self.emit(term)
        self.cur = None

    def goto_new(self, entry) -> Tok:
        tok = self.new_token()
        self.terminate(ir.Jump(tok))
        self.open(tok, entry)
        return tok

    # -- sinks
    def sink(self, sink, expr) -> None:
        if sink is None:
            return
        if sink == RETURN:
            self.terminate(ir.Return(expr))
        elif sink == FINISH:
            self.terminate(ir.FinishRun(expr))
        else:
            self.emit(ir.Eval(sink[1], expr))

    # -- lowering
    def items(self, items: tuple, sink) -> None:
        if not items:
            self.sink(sink, A.Lit(None))
            return
        for item in items[:-1]:
            self.item(item, None)
        last = items[-1]
        if sink is not None and _yields_value(last):
            self.item(last, sink)
        else:
            self.item(last, None)
            self.sink(sink, A.Lit(None))

    def item(self, it, sink) -> None:
        if isinstance(it, LSend):
            self.emit(ir.Send(it.site, it.dest, it.expr))
        elif isinstance(it, LRecv):
            self.goto_new(ir.AwaitRecv(it.site, it.src, it.pattern))
        elif isinstance(it, LEval):
            if sink is None:
                self.emit(ir.Eval(None, it.expr))
            else:
                self.sink(sink, it.expr)
        elif isinstance(it, LNil):
            self.sink(sink, A.Lit(None))
        elif isinstance(it, LBind):
            self.emit(ir.Bind(it.pattern, it.expr))
        elif isinstance(it, LChoose):
            cv = f"%cond{it.site}"
            self.emit(ir.Eval(cv, it.cond))
            if it.dests:
                self.emit(ir.SendChoice(it.site, it.dests, cv))
            t, e = self.new_token(), self.new_token()
            self.terminate(ir.BranchLocal(A.Var(cv), t, e))
            self.arms(t, it.then, e, it.else_, sink)
        elif isinstance(it, LOffer):
            self.goto_new(ir.AwaitChoice(it.site, it.decider))
            t, e = self.new_token(), self.new_token()
            self.terminate(ir.BranchOnChoice(it.site, t, e))
            self.arms(t, it.then, e, it.else_, sink)
        elif isinstance(it, LCheckpoint):
            self.checkpoint(it, sink)
        elif isinstance(it, LCall):
            self.call(it, sink)
        else:
            raise TypeError(f"unknown local item {it!r}")

    def arms(self, t: Tok, then: tuple, e: Tok, else_: tuple, sink) -> None:
        terminal = sink in (RETURN, FINISH)
        join = None if terminal else self.new_token()
        for tok, arm in ((t, then), (e, else_)):
            self.open(tok, ir.Continue())
            self.items(arm, sink)
            if not terminal:
                self.terminate(ir.Jump(join))
        if join is not None:
            self.open(join, ir.Continue())

    def checkpoint(self, it: LCheckpoint, sink) -> None:
        rescue, exit_ = self.new_token(), self.new_token()
        inner = sink
        if sink in (RETURN, FINISH):
            inner = ("assign", f"%ck{it.site}")
        self.emit(ir.EnterCheckpoint(it.site, rescue, exit_))
        self.items(it.body, inner)
        self.terminate(ir.ExitCheckpoint(it.site, exit_))
        self.open(rescue, ir.Rescue(it.site))
        self.items(it.rescue, inner)
        self.terminate(ir.ExitCheckpoint(it.site, exit_))
        self.open(exit_, ir.AwaitBarrier(it.site))
        if inner is not sink:
            self.sink(sink, A.Var(inner[1]))

    def call(self, it: LCall, sink) -> None:
        def term(ret):
            if it.indirect:
                return ir.CallIndirect(it.fname, it.args, ret)
            return ir.CallFn(it.fname, it.arity, it.args, ret)

        if it.bind is not None:
            pat = it.bind
        elif sink is None:
            pat = None
        elif sink in (RETURN, FINISH):
            pat = A.PVar("%ret")
        else:
            pat = A.PVar(sink[1])
        ret = self.new_token()
        self.terminate(term(ret))
        self.open(ret, ir.ReturnLanding(pat))
        if sink in (RETURN, FINISH) and it.bind is None:
            self.sink(sink, A.Var("%ret"))


def _start_params(f: A.ChorFunction, role: str) -> tuple:
    out = []
    for p in f.params:
        if isinstance(p, A.Located):
            out.append(p.pattern if p.role == role else A.PWild())
        else:
            out.append(A.PVar(p.name))
    return tuple(out)


def _retarget(obj, mapping: dict):
    changes = {}
    for fld in dataclasses.fields(obj):
        v = getattr(obj, fld.name)
        if isinstance(v, Tok):
            changes[fld.name] = mapping[v]
    return dataclasses.replace(obj, **changes) if changes else obj


def _renumber(b: _Builder, entry: Tok, start: int, out: dict) -> int:
    """DFS-preorder renumbering of ``b``'s blocks into ``out``; return next ordinal."""
    mapping: dict = {}
    stack = [entry]
    while stack:
        tok = stack.pop()
        if tok in mapping:
            continue
        mapping[tok] = Tok(b.fname, b.arity, b.role, start + len(mapping))
        succ = ir.block_successors(b.blocks[tok].body)
        stack.extend(reversed(succ))
    for tok in b.order:  # unreachable blocks cannot occur, but keep them deterministic
        if tok not in mapping:
            mapping[tok] = Tok(b.fname, b.arity, b.role, start + len(mapping))
    for old in sorted(mapping, key=lambda t: mapping[t].ordinal):
        blk = b.blocks[old]
        out[mapping[old]] = ir.HandlerBlock(mapping[old], blk.entry,
                                            [_retarget(i, mapping) for i in blk.body])
    return start + len(mapping)


def site_table(prog: A.ChorProgram) -> dict:
    """Every message-sending site in the program: site -> tuple of :class:`SiteInfo`."""
    sites: dict = {}
    for f in prog.functions:
        for s in A.iter_statements(f.body):
            if isinstance(s, A.Delivery):
                info = ir.SiteInfo("delivery", s.sender, (s.receiver,), s.span)
            elif isinstance(s, A.If):
                dests = s.notify if s.notify is not None else tuple(
                    r for r in prog.roles if r != s.decider)
                info = ir.SiteInfo("choice", s.decider, tuple(dests), s.span)
            else:
                continue
            cur = sites.setdefault(s.site, ())
            if info not in cur:
                sites[s.site] = cur + (info,)
    return sites


def required_functions(prog: A.ChorProgram, role: str) -> tuple:
    """Impl functions ``role`` must supply, in order of first use in the source."""
    chor = {(f.name, f.arity) for f in prog.functions}
    calls: dict = {}

    def add(e):
        for c in A.expr_calls(e):
            calls.setdefault(c, None)

    for f in prog.functions:
        for s in A.iter_statements(f.body):
            if isinstance(s, A.Delivery) and s.sender == role:
                add(s.expr)
            elif isinstance(s, A.If) and s.decider == role:
                add(s.cond)
            elif isinstance(s, A.LocalExpr) and s.role == role:
                add(s.expr)
            elif isinstance(s, A.With) and s.role == role and not isinstance(s.rhs, A.Call):
                add(s.rhs)
            elif isinstance(s, A.Call):
                for a in s.args:
                    if isinstance(a, A.LocatedArg) and a.role == role:
                        add(a.expr)
    return tuple(ir.FunctionSpec(n, a) for n, a in calls
                 if not is_builtin(n, a) and (n, a) not in chor)


def project(prog: A.ChorProgram, role: str) -> ir.EndpointProgram:
    """Project ``prog`` to ``role``.  Raises :class:`MergeError` on a knowledge-of-choice failure."""
    from .liveness import annotate

    if role not in prog.roles:
        raise ValueError(f"unknown role {role}")
    blocks: dict = {}
    functions: dict = {}
    next_ord: dict = {}
    for f in prog.functions:
        key = (f.name, f.arity)
        b = _Builder(f.name, f.arity, role)
        entry = b.new_token()
        b.open(entry, ir.Start(_start_params(f, role)))
        view = local_view(prog.roles, f.body, role, tail=True)
        b.items(view, FINISH if f.name == "run" else RETURN)
        start = next_ord.get(key, 0)
        next_ord[key] = _renumber(b, entry, start, blocks)
        functions[key] = functions.get(key, ()) + (Tok(f.name, f.arity, role, start),)
    annotate(blocks)
    run_entry = functions[("run", prog.run.arity)][0]
    return ir.EndpointProgram(role, blocks, run_entry, functions, site_table(prog),
                              required_functions(prog, role))


def project_all(prog: A.ChorProgram) -> dict:
    return {r: project(prog, r) for r in prog.roles}
