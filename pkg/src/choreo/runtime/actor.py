"""A role's actor: control stack, variables, custom mailbox and block execution.

An actor runs one handler block per scheduling step.  Blocks whose entry
waits for something (a message, a choice, a barrier) leave the actor
blocked until its inbox or control queue can satisfy the wait.
"""

from __future__ import annotations

from collections import deque

from ..lang.evaluate import MissingImplFunction, bind, eval_expr, match_pattern
from ..lang.values import Crash, FuncRef, format_value, truthy
from ..messages import BARRIER, CHOICE, CHOREX, RECOVER, REVIVE, CivToken, Message
from ..projection import ir
from ..recovery.delta import Snapshot
from .stack import CheckpointFrame, ReturnFrame, Stack

RUNNING = "running"
FINISHED = "finished"
CRASHED = "crashed"
STOPPED = "stopped"
IDLE = "idle"

_NO_VALUE = object()


class ProtocolViolation(Exception):
    """The runtime reached a state the projection should make impossible."""


class Actor:
    def __init__(self, host, session: str, role: str, slot: int, program: ir.EndpointProgram,
                 impl, config: dict, epoch: int = 0):
        self.host = host
        self.session = session
        self.role = role
        self.slot = slot
        self.program = program
        self.impl = impl
        self.config = dict(config)
        self.epoch = epoch
        self.inbox: deque = deque()
        self.control: deque = deque()
        self.stack = Stack.EMPTY
        self.vars: dict = {}
        self.seqs: dict = {}
        self.current = None
        self.blocked = False
        self.status = IDLE
        self.ret_value = _NO_VALUE
        self.result = None
        self.foreign_drops = 0
        self.stale_drops = 0
        self._match = None  # cached inbox index satisfying the current wait
        self._scan = True

    # ---------------------------------------------------------------- setup

    def start(self, args) -> None:
        self.status = RUNNING
        self._enter_function(("run", len(args)), list(args))

    def _enter_function(self, key: tuple, args: list) -> None:
        clauses = self.program.functions.get(key)
        if not clauses:
            raise Crash(f"undefined function {key[0]}/{key[1]}")
        for tok in clauses:
            params = self.program.blocks[tok].entry.params
            env: dict = {}
            ok = True
            for p, v in zip(params, args):
                got = match_pattern(p, v, env)
                if got is None:
                    ok = False
                    break
                env.update(got)
            if ok:
                self.vars = env
                self._goto(tok)
                return
        shown = ", ".join(format_value(a) for a in args)
        raise Crash(f"no clause of {key[0]}/{key[1]} matches ({shown})")

    # ----------------------------------------------------------- scheduling

    def has_work(self) -> bool:
        if self.control:
            return True
        if self.status != RUNNING:
            return False
        if not self.blocked:
            return True
        return self._find_match() is not None

    def _waiting_entry(self):
        return self.program.blocks[self.current].entry if self.blocked else None

    def _find_match(self):
        if not self._scan:
            return self._match
        self._scan = False
        self._match = None
        entry = self._waiting_entry()
        if isinstance(entry, ir.AwaitRecv):
            want, sender = CHOREX, entry.sender
        elif isinstance(entry, ir.AwaitChoice):
            want, sender = CHOICE, entry.decider
        else:
            return None
        for i, (m, _) in enumerate(self.inbox):
            c = m.civ
            if (m.mtype == want and c.site == entry.site and c.epoch == self.epoch
                    and c.sender == sender and c.receiver == self.role
                    and c.session == self.session):
                self._match = i
                break
        return self._match

    def enqueue(self, msg: Message, seq=None) -> None:
        """Accept a message from the transport; ``seq`` numbers it within its channel."""
        if msg.is_control:
            self.control.append(msg)
            return
        civ = msg.civ
        if civ.session != self.session or civ.receiver != self.role:
            self.foreign_drops += 1
            self.host.emit(self, "drop", reason="foreign session", site=civ.site)
            return
        if civ.epoch < self.epoch:
            self.stale_drops += 1
            self.host.emit(self, "drop", reason="stale epoch", site=civ.site, epoch=civ.epoch)
            return
        self.inbox.append((msg, seq))
        self._scan = True

    def step(self) -> None:
        """Handle one control message, or run one handler block."""
        if self.control:
            self._handle_control(self.control.popleft())
            return
        if self.status != RUNNING:
            return
        try:
            if self.blocked:
                if not self._consume():
                    return
            self._run_block()
        except (Crash, MissingImplFunction) as exc:
            self._crash(getattr(exc, "reason", str(exc)))

    # ------------------------------------------------------------ execution

    def _goto(self, tok) -> None:
        self.current = tok
        self.blocked = isinstance(self.program.blocks[tok].entry, ir.WAITING_ENTRIES)
        self._scan = True

    def _consume(self) -> bool:
        idx = self._find_match()
        if idx is None:
            return False
        msg, seq = self.inbox[idx]
        del self.inbox[idx]
        self._scan = True
        entry = self._waiting_entry()
        self.blocked = False
        if isinstance(entry, ir.AwaitRecv):
            self.host.emit(self, "recv", site=entry.site, sender=entry.sender, epoch=msg.civ.epoch,
                           seq=seq)
            bind(entry.pattern, msg.payload, self.vars)
        else:
            self.host.emit(self, "choice_recv", site=entry.site, sender=entry.decider,
                           value=msg.payload, seq=seq)
            self.vars[ir.CHOICE_VAR] = bool(msg.payload)
        return True

    def _eval(self, e):
        return eval_expr(e, self.vars, self.impl)

    def _run_block(self) -> None:
        blk = self.program.blocks[self.current]
        self.host.emit(self, "block", token=blk.token)
        entry = blk.entry
        if isinstance(entry, ir.ReturnLanding):
            v, self.ret_value = self.ret_value, _NO_VALUE
            if entry.pattern is not None:
                bind(entry.pattern, v, self.vars)
        for ins in blk.body:
            t = type(ins)
            if t is ir.Eval:
                v = self._eval(ins.expr)
                if ins.target is not None:
                    self.vars[ins.target] = v
            elif t is ir.Bind:
                bind(ins.pattern, self._eval(ins.expr), self.vars)
            elif t is ir.Send:
                v = self._eval(ins.expr)
                self._send(CHOREX, ins.site, ins.dest, v)
            elif t is ir.SendChoice:
                c = truthy(self.vars[ins.cond_var])
                for d in ins.dests:
                    self._send(CHOICE, ins.site, d, c)
            elif t is ir.EnterCheckpoint:
                self._enter_checkpoint(ins)
            else:
                self._terminate(ins)
                return
        raise ProtocolViolation(f"block {blk.token} has no terminator")

    def _send(self, mtype: str, site: int, dest: str, payload) -> None:
        civ = CivToken(self.session, site, self.epoch, self.role, dest)
        msg = Message(mtype, civ, payload)
        self.host.emit(self, "send" if mtype == CHOREX else "choice_send", site=site, dest=dest,
                       epoch=self.epoch)
        self.host.send(self, dest, msg)

    def _enter_checkpoint(self, ins: ir.EnterCheckpoint) -> None:
        seq = self.seqs.get(ins.site, 0) + 1
        self.seqs[ins.site] = seq
        instance = (ins.site, seq)
        snap = Snapshot(self.stack, dict(self.vars), dict(self.seqs))
        self.host.emit(self, "ckpt_enter", instance=instance, epoch=self.epoch, vars=dict(self.vars))
        self.host.checkpoint_enter(self, instance, snap, ins.rescue, ins.exit)
        self.stack = self.stack.push(
            CheckpointFrame(instance, dict(self.vars), dict(self.seqs), ins.rescue, ins.exit))

    def _terminate(self, term) -> None:
        t = type(term)
        if t is ir.Jump:
            self._goto(term.target)
        elif t is ir.BranchLocal:
            self._goto(term.then if truthy(self._eval(term.cond)) else term.else_)
        elif t is ir.BranchOnChoice:
            self._goto(term.then if self.vars[ir.CHOICE_VAR] else term.else_)
        elif t is ir.CallFn or t is ir.CallIndirect:
            args = [self._eval(a) for a in term.args]
            if t is ir.CallIndirect:
                ref = self.vars.get(term.funcvar)
                if not isinstance(ref, FuncRef) or ref.arity != len(args):
                    raise Crash(f"{term.funcvar} is not a function of arity {len(args)}")
                key = (ref.name, ref.arity)
            else:
                key = (term.fname, term.arity)
            live = self.program.blocks[term.ret].live_in
            saved = {k: self.vars[k] for k in live if k in self.vars}
            self.stack = self.stack.push(ReturnFrame(term.ret, saved))
            self._enter_function(key, args)
        elif t is ir.Return:
            v = self._eval(term.expr)
            if not self.stack or not isinstance(self.stack.top, ReturnFrame):
                raise ProtocolViolation("return without a return frame")
            frame, self.stack = self.stack.pop()
            self.vars = dict(frame.saved_vars)
            self.ret_value = v
            self._goto(frame.ret)
        elif t is ir.FinishRun:
            v = self._eval(term.expr)
            if self.stack:
                raise ProtocolViolation(f"run finished with {len(self.stack)} frames on the stack")
            self.status = FINISHED
            self.result = v
            self.host.emit(self, "finish", value=v)
            self.host.finish(self, v)
        elif t is ir.ExitCheckpoint:
            top = self.stack.top if self.stack else None
            if not isinstance(top, CheckpointFrame) or top.instance[0] != term.site:
                raise ProtocolViolation(f"checkpoint exit {term.site} without its frame")
            self.host.emit(self, "ckpt_done", instance=top.instance, epoch=self.epoch)
            self._goto(term.exit)
            self.host.checkpoint_done(self, top.instance)
        else:
            raise ProtocolViolation(f"unknown terminator {term!r}")

    def _crash(self, reason: str) -> None:
        self.status = CRASHED
        self.host.emit(self, "crash", reason=reason, block=self.current)
        self.host.crash(self, reason)

    # ------------------------------------------------------------- control

    def _handle_control(self, msg: Message) -> None:
        if msg.mtype == BARRIER:
            instance, epoch = msg.payload
            top = self.stack.top if self.stack else None
            entry = self._waiting_entry()
            if (epoch != self.epoch or not isinstance(entry, ir.AwaitBarrier)
                    or not isinstance(top, CheckpointFrame) or top.instance != instance):
                self.host.emit(self, "drop", reason="stale barrier", instance=instance)
                return
            _, self.stack = self.stack.pop()
            self.blocked = False
            self.host.emit(self, "barrier_pass", instance=instance, epoch=epoch)
        elif msg.mtype == RECOVER:
            config, target, epoch = msg.payload
            self._unwind(target, config, epoch)
        elif msg.mtype == REVIVE:
            kind, state = msg.payload
            self._revive(state)
        else:
            raise ProtocolViolation(f"unexpected control message {msg.mtype}")

    def _install(self, frame: CheckpointFrame, config: dict, epoch: int) -> None:
        self.vars = dict(frame.saved_vars)
        self.seqs = dict(frame.saved_seqs)
        self.config = dict(config)
        self.epoch = epoch
        self.ret_value = _NO_VALUE
        kept = deque(e for e in self.inbox if e[0].civ.epoch >= epoch)
        self.stale_drops += len(self.inbox) - len(kept)
        self.inbox = kept
        self.status = RUNNING
        self._goto(frame.rescue)
        self.host.emit(self, "rescue_enter", instance=frame.instance, epoch=epoch,
                       vars=dict(self.vars))

    def _unwind(self, target: tuple, config: dict, epoch: int) -> None:
        node = self.stack
        while node and not (isinstance(node.top, CheckpointFrame) and node.top.instance == target):
            node = node.below
        if not node:
            self.host.abort(f"{self.role} has no checkpoint frame for instance {target}")
            return
        self.stack = node
        self.host.emit(self, "recover", instance=target, epoch=epoch)
        self._install(node.top, config, epoch)

    def _revive(self, state: dict) -> None:
        snap: Snapshot = state["snapshot"]
        frame = CheckpointFrame(state["instance"], dict(snap.vars), dict(snap.seqs),
                                state["rescue"], state["exit"])
        self.stack = snap.stack.push(frame)
        self.host.emit(self, "revive", instance=state["instance"], epoch=state["epoch"])
        self._install(frame, state["config"], state["epoch"])

    def snapshot(self) -> Snapshot:
        return Snapshot(self.stack, dict(self.vars), dict(self.seqs))
