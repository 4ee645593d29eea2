"""Sessions and the seeded scheduler that drives them.

A :class:`World` owns a transport, a trace and any number of sessions.
Every scheduling step picks one enabled action at random: deliver the head
of one channel, let one actor run a handler block (or a control message),
or let one session's monitor handle one event from one actor.  Actors only
ever see their own inbox and control queue, so any interleaving the seeded
RNG produces is one a real network could produce.
"""

from __future__ import annotations

import random
import time
import uuid
from collections import deque

from ..lang import ast as A
from ..lang.evaluate import ImplRegistry, MissingImplFunction
from ..lang.interp import SessionAborted
from ..lang.values import UNIT
from ..messages import BARRIER, RECOVER, REVIVE, Message
from ..recovery.monitor import Monitor
from ..recovery.supervisor import Supervisor
from ..transport.mem import MemTransport, update_route
from .actor import CRASHED, FINISHED, RUNNING, STOPPED, Actor
from .trace import Trace


class SessionError(Exception):
    pass


class SessionTimeout(SessionError):
    pass


class Session:
    """One running choreography instance; also the actors' and monitor's host."""

    def __init__(self, world: "World", programs: dict, impls: ImplRegistry, roles: tuple,
                 token: str | None = None, use_deltas: bool = True):
        self.world = world
        self.programs = programs
        self.impls = impls
        self.roles = roles
        self.token = token or uuid.UUID(int=world.rng.getrandbits(128)).hex
        self.monitor = Monitor(self, roles, use_deltas=use_deltas)
        self.supervisor = Supervisor(self)
        self.config: dict = {}
        self.actors: dict = {}  # role -> live actor
        self.all_actors: list = []
        self.monitor_inbox: dict = {}  # actor slot -> deque of events
        self.results: dict = {}
        self.status = "running"
        self.error = None

    # ----------------------------------------------------------- lifecycle

    def spawn(self, role: str, epoch: int = 0) -> Actor:
        slot = self.world.new_slot()
        actor = Actor(self, self.token, role, slot, self.programs[role], self.impls.table(role),
                      self.config, epoch)
        self.world.register(actor, self)
        self.all_actors.append(actor)
        self.actors[role] = actor
        self.config = update_route(self.config, role, self.world.transport.address(slot)) \
            if role in self.config else {**self.config, role: self.world.transport.address(slot)}
        return actor

    def start(self, args) -> None:
        for role in self.roles:
            self.spawn(role)
        for role in self.roles:
            self.actors[role].config = dict(self.config)
        for role in self.roles:
            actor = self.actors[role]
            run_params = self.programs[role].blocks[self.programs[role].entry].entry.params
            role_args = [v if not isinstance(p, A.PWild) else UNIT for p, v in zip(run_params, args)]
            try:
                actor.start(role_args)
            except Exception as exc:  # a run clause that does not match is a crash
                actor.status = CRASHED
                self.crash(actor, str(exc))

    @property
    def done(self) -> bool:
        return self.status != "running"

    def result_map(self) -> dict:
        return {r: self.results.get(r) for r in self.roles}

    # ------------------------------------------------------ actor callbacks

    def emit(self, actor: Actor, kind: str, **detail) -> None:
        self.world.trace.emit(self.token, actor.role, kind, **detail)

    def emit_monitor(self, kind: str, **detail) -> None:
        self.world.trace.emit(self.token, "monitor", kind, **detail)

    def send(self, actor: Actor, dest: str, msg: Message) -> None:
        self.world.send(actor, actor.config[dest], msg)

    def _to_monitor(self, actor: Actor, event: tuple) -> None:
        if self.status != "running":
            return
        q = self.monitor_inbox.get(actor.slot)
        if q is None:
            q = self.monitor_inbox[actor.slot] = deque()
        q.append(event)

    def checkpoint_enter(self, actor, instance, snap, rescue, exit_) -> None:
        self._to_monitor(actor, ("enter", actor.role, instance, snap, rescue, exit_, actor.epoch))

    def checkpoint_done(self, actor, instance) -> None:
        self._to_monitor(actor, ("done", actor.role, instance, actor.epoch))

    def crash(self, actor, reason: str) -> None:
        self._to_monitor(actor, ("crash", actor.role, reason))

    def finish(self, actor, value) -> None:
        self.results[actor.role] = value
        if all(self.actors[r].status == FINISHED for r in self.roles):
            self.status = "finished"

    def abort(self, reason: str) -> None:
        self.supervisor.teardown(reason)

    # ---------------------------------------------------- monitor callbacks

    def monitor_step(self, slot: int) -> None:
        q = self.monitor_inbox[slot]
        event = q.popleft()
        if not q:
            del self.monitor_inbox[slot]
        kind = event[0]
        m = self.monitor
        if kind == "enter":
            _, role, instance, snap, rescue, exit_, epoch = event
            m.record_checkpoint(role, instance, snap, rescue, exit_, epoch)
        elif kind == "done":
            _, role, instance, epoch = event
            m.on_done(role, instance, epoch)
        else:
            _, role, reason = event
            m.on_crash(role, reason)

    def broadcast_barrier(self, instance: tuple, epoch: int) -> None:
        for role in self.roles:
            self.actors[role].control.append(Message(BARRIER, None, (instance, epoch)))

    def revive(self, role: str, state: dict) -> None:
        old = self.actors[role]
        old.status = STOPPED
        self.monitor_inbox.pop(old.slot, None)
        actor = self.spawn(role, state["epoch"])
        state = dict(state, config=dict(self.config))
        actor.control.append(Message(REVIVE, None, ("state", state)))

    def broadcast_recover(self, crashed: str, target: tuple, epoch: int) -> None:
        for role in self.roles:
            if role != crashed:
                self.actors[role].control.append(
                    Message(RECOVER, None, (dict(self.config), target, epoch)))

    # ------------------------------------------------------------- queries

    @property
    def recoveries(self) -> int:
        return self.monitor.recoveries

    @property
    def foreign_drops(self) -> int:
        return sum(a.foreign_drops for a in self.all_actors)


class World:
    """Seeded single-threaded scheduler over one transport and several sessions."""

    def __init__(self, seed: int = 0, transport=None, trace: Trace | None = None,
                 crosstalk: float = 0.0, delay_roles=(), trace_blocks: bool = False):
        self.rng = random.Random(seed)
        self.transport = transport if transport is not None else MemTransport()
        self.trace = trace if trace is not None else Trace(blocks=trace_blocks)
        self.crosstalk = crosstalk
        self.delay_roles = frozenset(delay_roles)
        self.sessions: list = []
        self.slots: dict = {}  # slot -> (actor, session)
        self._next_slot = 0
        self.steps = 0
        self.undeliverable = 0

    def new_slot(self) -> int:
        s = self._next_slot
        self._next_slot += 1
        return s

    def register(self, actor: Actor, session: Session) -> None:
        self.slots[actor.slot] = (actor, session)

    def start(self, programs: dict, impls: ImplRegistry | None, args=(), use_deltas: bool = True,
              roles: tuple | None = None) -> Session:
        impls = impls or ImplRegistry()
        roles = tuple(roles or programs)
        if len(set(roles)) != len(roles):
            raise SessionError("duplicate role")
        for r in roles:
            if r not in programs:
                raise SessionError(f"no endpoint program for role {r}")
            missing = impls.missing(r, programs[r].required)
            if missing:
                spec = missing[0]
                raise MissingImplFunction(r, spec.name, spec.arity)
        s = Session(self, programs, impls, roles, use_deltas=use_deltas)
        self.sessions.append(s)
        s.start(list(args))
        return s

    # ------------------------------------------------------------ transport

    def send(self, actor: Actor, addr, msg: Message) -> None:
        self.transport.send(actor.slot, addr, msg)

    def _hand_over(self, src_slot: int, dst_slot: int, seq, msg: Message) -> None:
        got = self.slots.get(dst_slot)
        if got is None:
            self.undeliverable += 1
            return
        actor, session = got
        if actor.status in (STOPPED, CRASHED) or session.done:
            self.undeliverable += 1
            self.trace.emit(session.token, actor.role, "drop", reason="undeliverable",
                            site=msg.civ.site if msg.civ else None)
            return
        if msg.civ is not None:
            self.trace.emit(session.token, actor.role, "deliver", src=src_slot, dst=dst_slot,
                            seq=seq, site=msg.civ.site, sender=msg.civ.sender)
        actor.enqueue(msg, seq)
        if self.crosstalk and len(self.sessions) > 1 and self.rng.random() < self.crosstalk:
            others = [s for s in self.sessions if s is not session and not s.done]
            if others:
                other = self.rng.choice(others)
                target = other.actors.get(actor.role)
                if target is not None and target.status == RUNNING:
                    target.enqueue(msg, None)

    # ------------------------------------------------------------ scheduling

    def _actions(self) -> tuple:
        actions = []
        held = []
        for key in self.transport.ready():
            src = self.slots.get(key[0])
            if src is not None and src[0].role in self.delay_roles:
                held.append(("deliver", key))
            else:
                actions.append(("deliver", key))
        for slot, (actor, session) in self.slots.items():
            if not session.done and actor.has_work():
                actions.append(("actor", actor))
        for session in self.sessions:
            if not session.done:
                for slot in session.monitor_inbox:
                    actions.append(("monitor", session, slot))
        return actions, held

    def step(self) -> bool:
        """Run one action; return False when nothing is enabled."""
        actions, held = self._actions()
        if not actions:
            actions = held
        if not actions:
            got = self.transport.poll(0.05) if self.transport.in_flight() else []
            for src, dst, seq, msg in got:
                self._hand_over(src, dst, seq, msg)
            return bool(got) or bool(self.transport.in_flight())
        act = actions[self.rng.randrange(len(actions))]
        self.steps += 1
        if act[0] == "deliver":
            self._hand_over(*self.transport.deliver(act[1]))
        elif act[0] == "actor":
            act[1].step()
        else:
            act[1].monitor_step(act[2])
        if self.transport.asynchronous:
            for src, dst, seq, msg in self.transport.poll(0):
                self._hand_over(src, dst, seq, msg)
        return True

    def run(self, until=None, timeout: float | None = None, max_steps: int | None = None) -> None:
        """Step until ``until()`` holds or every session is done.

        A session with nothing left to do but still running is deadlocked and
        is aborted.
        """
        until = until or (lambda: all(s.done for s in self.sessions))
        deadline = None if timeout is None else time.monotonic() + timeout
        n = 0
        while not until():
            if deadline is not None and time.monotonic() > deadline:
                raise SessionTimeout(f"sessions still running after {timeout}s")
            if max_steps is not None and n >= max_steps:
                raise SessionTimeout(f"sessions still running after {max_steps} steps")
            n += 1
            if not self.step():
                for s in self.sessions:
                    if not s.done:
                        s.abort("deadlock: no actor can make progress")

    def close(self) -> None:
        self.transport.close()


class SessionHandle:
    """Caller-side view of a session started with :func:`start_session`."""

    def __init__(self, world: World, session: Session):
        self.world = world
        self.session = session

    @property
    def token(self) -> str:
        return self.session.token

    @property
    def config(self) -> dict:
        return dict(self.session.config)

    def await_results(self, timeout: float | None = None) -> dict:
        if timeout is not None and timeout <= 0 and not self.session.done:
            raise SessionTimeout("session has not finished")
        self.world.run(until=lambda: self.session.done, timeout=timeout)
        if self.session.status == "aborted":
            raise self.session.error
        return self.session.result_map()


def start_session(programs: dict, impls: ImplRegistry | None = None, args=(), transport=None,
                  seed: int = 0, trace: Trace | None = None, use_deltas: bool = True,
                  roles: tuple | None = None) -> SessionHandle:
    world = World(seed=seed, transport=transport, trace=trace)
    return SessionHandle(world, world.start(programs, impls, args, use_deltas=use_deltas, roles=roles))
