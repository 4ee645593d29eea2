"""Human-readable rendering of endpoint programs (``choreo project``)."""

from __future__ import annotations

from ..lang import ast as A
from ..lang.values import format_value
from . import ir

_PREC = {"==": 1, "!=": 1, "<": 1, "<=": 1, ">": 1, ">=": 1, "<>": 2, "+": 3, "-": 3,
         "*": 4, "/": 4, "rem": 4}


def fmt_expr(e, prec: int = 0) -> str:
    if isinstance(e, A.Lit):
        return format_value(e.value)
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.BinOp):
        p = _PREC[e.op]
        s = f"{fmt_expr(e.left, p)} {e.op} {fmt_expr(e.right, p + 1)}"
        return f"({s})" if p < prec else s
    if isinstance(e, A.Neg):
        return f"-{fmt_expr(e.operand, 9)}"
    if isinstance(e, A.LocalCall):
        return f"{e.fname}({', '.join(fmt_expr(a) for a in e.args)})"
    if isinstance(e, A.FuncRefExpr):
        return f"@{e.name}/{e.arity}"
    if isinstance(e, A.TupleExpr):
        return "{" + ", ".join(fmt_expr(x) for x in e.items) + "}"
    if isinstance(e, A.ListExpr):
        return "[" + ", ".join(fmt_expr(x) for x in e.items) + "]"
    return repr(e)


def fmt_pattern(p) -> str:
    if p is None:
        return "_"
    if isinstance(p, A.PVar):
        return p.name
    if isinstance(p, A.PWild):
        return "_"
    if isinstance(p, A.PPin):
        return f"^{p.name}"
    if isinstance(p, A.PLit):
        return format_value(p.value)
    if isinstance(p, A.PTuple):
        return "{" + ", ".join(fmt_pattern(x) for x in p.items) + "}"
    if isinstance(p, A.PList):
        return "[" + ", ".join(fmt_pattern(x) for x in p.items) + "]"
    return repr(p)


def fmt_entry(entry) -> str:
    if isinstance(entry, ir.Start):
        return f"start({', '.join(fmt_pattern(p) for p in entry.params)})"
    if isinstance(entry, ir.AwaitRecv):
        return f"await recv site {entry.site} from {entry.sender} -> {fmt_pattern(entry.pattern)}"
    if isinstance(entry, ir.AwaitChoice):
        return f"await choice site {entry.site} from {entry.decider}"
    if isinstance(entry, ir.AwaitBarrier):
        return f"await barrier checkpoint {entry.site}"
    if isinstance(entry, ir.ReturnLanding):
        return f"return landing -> {fmt_pattern(entry.pattern)}"
    if isinstance(entry, ir.Rescue):
        return f"rescue checkpoint {entry.site}"
    return "continue"


def fmt_instruction(ins) -> str:
    if isinstance(ins, ir.Eval):
        return f"eval {fmt_expr(ins.expr)}" if ins.target is None else \
            f"eval {ins.target} = {fmt_expr(ins.expr)}"
    if isinstance(ins, ir.Bind):
        return f"bind {fmt_pattern(ins.pattern)} = {fmt_expr(ins.expr)}"
    if isinstance(ins, ir.Send):
        return f"send site {ins.site} to {ins.dest}: {fmt_expr(ins.expr)}"
    if isinstance(ins, ir.SendChoice):
        return f"send choice site {ins.site} to [{', '.join(ins.dests)}]: {ins.cond_var}"
    if isinstance(ins, ir.EnterCheckpoint):
        return f"enter checkpoint {ins.site} rescue {ins.rescue} exit {ins.exit}"
    if isinstance(ins, ir.Jump):
        return f"jump {ins.target}"
    if isinstance(ins, ir.BranchLocal):
        return f"branch {fmt_expr(ins.cond)} then {ins.then} else {ins.else_}"
    if isinstance(ins, ir.BranchOnChoice):
        return f"branch on choice {ins.site} then {ins.then} else {ins.else_}"
    if isinstance(ins, ir.CallFn):
        return f"call {ins.fname}/{ins.arity}({', '.join(fmt_expr(a) for a in ins.args)}) " \
               f"return {ins.ret}"
    if isinstance(ins, ir.CallIndirect):
        return f"call {ins.funcvar}.({', '.join(fmt_expr(a) for a in ins.args)}) return {ins.ret}"
    if isinstance(ins, ir.Return):
        return f"return {fmt_expr(ins.expr)}"
    if isinstance(ins, ir.FinishRun):
        return f"finish {fmt_expr(ins.expr)}"
    if isinstance(ins, ir.ExitCheckpoint):
        return f"exit checkpoint {ins.site} -> {ins.exit}"
    return repr(ins)


def _names(s) -> str:
    return "{" + ", ".join(sorted(s)) + "}"


def format_endpoint(ep: ir.EndpointProgram) -> str:
    lines = [f"role {ep.role}  entry {ep.entry}"]
    if ep.required:
        req = ", ".join(str(s) for s in sorted(ep.required))
        lines.append(f"  requires {req}")
    for tok, blk in ep.blocks.items():
        lines.append("")
        lines.append(f"  block {tok}: {fmt_entry(blk.entry)}")
        lines.append(f"    live_in {_names(blk.live_in)}  live_out {_names(blk.live_out)}")
        for ins in blk.body:
            lines.append(f"    {fmt_instruction(ins)}")
    return "\n".join(lines) + "\n"
