"""The per-session monitor: checkpoint records, barriers, crash recovery.

Each role has a chain of checkpoint records, one per open checkpoint
instance, innermost last.  A record stores a delta against the previous
record's reconstruction.  When a barrier closes the last open instance the
dropped record's reconstruction becomes the chain's base, so a loop that
re-enters a checkpoint at a slightly deeper stack stores only the new
frames instead of the whole stack.
"""

from __future__ import annotations

from dataclasses import dataclass

from .delta import EMPTY_SNAPSHOT, Snapshot, StackDelta, apply_delta, compute_delta, full_delta


@dataclass
class CheckpointRecord:
    role: str
    instance: tuple
    delta: StackDelta
    epoch: int
    rescue: object
    exit: object


class Monitor:
    """Sequential, message-driven monitor state for one session.

    ``host`` provides ``broadcast_barrier``, ``revive``, ``broadcast_recover``,
    ``abort`` and ``emit``; the monitor never touches actors directly.
    """

    def __init__(self, host, roles: tuple, use_deltas: bool = True):
        self.host = host
        self.roles = tuple(roles)
        self.use_deltas = use_deltas
        self.epoch = 0
        self.chains: dict = {r: [] for r in self.roles}
        self.bases: dict = {r: EMPTY_SNAPSHOT for r in self.roles}
        self._tail: dict = {r: EMPTY_SNAPSHOT for r in self.roles}  # cached tail reconstruction
        self._added: dict = {r: 0 for r in self.roles}  # frames stored in each role's deltas
        self.done: dict = {}  # instance -> set of roles
        self.rescuing: set = set()
        self.pending = None  # (role, instance) awaiting every role's record
        self.recoveries = 0
        self.stored_frames = 0
        self.peak_frames = 0
        self.audit: list = []

    # ------------------------------------------------------------ records

    def reconstruct(self, role: str, index: int | None = None) -> Snapshot:
        """Rebuild the snapshot at chain position ``index`` (default: the tail)."""
        chain = self.chains[role]
        if index is None:
            index = len(chain) - 1
        if index < 0:
            return self.bases[role]
        if index == len(chain) - 1 and self._tail[role] is not None:
            return self._tail[role]
        if not self.use_deltas:
            return apply_delta(EMPTY_SNAPSHOT, chain[index].delta)
        snap = self.bases[role]
        for rec in chain[:index + 1]:
            snap = apply_delta(snap, rec.delta)
        if index == len(chain) - 1:
            self._tail[role] = snap
        return snap

    def _recount(self, role: str) -> None:
        self._added[role] = sum(rec.delta.frame_count for rec in self.chains[role])

    def _count(self) -> None:
        total = 0
        for r in self.roles:
            if self.chains[r] and self.use_deltas:
                total += self.bases[r].stack.depth
            total += self._added[r]
        self.stored_frames = total
        self.peak_frames = max(self.peak_frames, total)

    def record_checkpoint(self, role: str, instance: tuple, snap: Snapshot, rescue, exit_,
                          epoch: int) -> None:
        if epoch != self.epoch:
            self.audit.append(("stale_enter", role, instance, epoch))
            return
        if self.use_deltas:
            delta = compute_delta(self.reconstruct(role), snap)
        else:
            delta = full_delta(snap)
        self.chains[role].append(CheckpointRecord(role, instance, delta, epoch, rescue, exit_))
        self._added[role] += delta.frame_count
        self._tail[role] = snap
        self._count()
        if self.pending is not None:
            self._try_recover()

    def _drop(self, role: str, instance: tuple) -> None:
        chain = self.chains[role]
        idx = next((i for i, rec in enumerate(chain) if rec.instance == instance), None)
        if idx is None:
            return
        if idx == len(chain) - 1:
            if len(chain) == 1:
                # keep the closed instance's state as the base for the next chain
                last = self.reconstruct(role)
                self.bases[role] = last if self.use_deltas else EMPTY_SNAPSHOT
                self._tail[role] = self.bases[role]
            else:
                self._tail[role] = None  # rebuilt lazily, only if another record arrives
            self._added[role] -= chain.pop().delta.frame_count
            return
        snaps = [self.reconstruct(role, i) for i in range(len(chain))]
        del chain[idx]
        del snaps[idx]
        prev = self.bases[role]
        for i, rec in enumerate(chain):
            rec.delta = compute_delta(prev, snaps[i]) if self.use_deltas else full_delta(snaps[i])
            prev = snaps[i]
        self._tail[role] = snaps[-1] if snaps else self.bases[role]
        self._recount(role)

    def open_instances(self, role: str) -> list:
        return [rec.instance for rec in self.chains[role]]

    # ------------------------------------------------------------ barrier

    def on_done(self, role: str, instance: tuple, epoch: int) -> None:
        if epoch != self.epoch:
            self.audit.append(("stale_done", role, instance, epoch))
            return
        if instance not in self.open_instances(role):
            self.audit.append(("unknown_done", role, instance, epoch))
            return
        roles = self.done.setdefault(instance, set())
        roles.add(role)
        if len(roles) == len(self.roles):
            del self.done[instance]
            self.rescuing.discard(instance)
            for r in self.roles:
                self._drop(r, instance)
            self._count()
            self.host.emit_monitor("barrier", instance=instance, epoch=self.epoch)
            self.host.broadcast_barrier(instance, self.epoch)

    # ------------------------------------------------------------ crashes

    def on_crash(self, role: str, reason: str) -> None:
        if self.pending is not None:
            self.host.abort(f"{role} crashed while recovery of {self.pending[1]} was pending: {reason}")
            return
        chain = self.chains[role]
        if not chain:
            self.host.abort(f"crash outside checkpoint at {role}: {reason}")
            return
        target = chain[-1].instance
        if target in self.rescuing:
            self.host.abort(f"crash inside rescue at {role}: {reason}")
            return
        self.pending = (role, target)
        self._try_recover()

    def _try_recover(self) -> None:
        role, target = self.pending
        if not all(target in self.open_instances(r) for r in self.roles):
            return  # wait until every role has checkpointed this instance
        self.pending = None
        self.epoch += 1
        self.recoveries += 1
        idx = self.open_instances(role).index(target)
        snap = self.reconstruct(role, idx)
        rec = self.chains[role][idx]
        for r in self.roles:
            chain = self.chains[r]
            cut = self.open_instances(r).index(target) + 1
            if cut < len(chain):
                del chain[cut:]
                self._tail[r] = snap if r == role else None
                self._recount(r)
        self._tail[role] = snap
        self.done.clear()
        self.rescuing = {i for i in self.rescuing if i in self.open_instances(role)}
        self.rescuing.add(target)
        self._count()
        self.host.emit_monitor("recover", crashed=role, instance=target, epoch=self.epoch)
        state = {"snapshot": snap, "instance": target, "rescue": rec.rescue, "exit": rec.exit,
                 "epoch": self.epoch}
        self.host.revive(role, state)
        self.host.broadcast_recover(role, target, self.epoch)
