"""In-process transport: one unbounded FIFO channel per (sender slot, receiver slot)."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Address:
    kind: str  # "mem" or "tcp"
    slot: int
    host: Optional[str] = None
    port: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "tcp":
            return f"tcp://{self.host}:{self.port}/{self.slot}"
        return f"mem:{self.slot}"


class MemTransport:
    """Lossless, pairwise-FIFO channels; the scheduler decides which channel delivers next."""

    kind = "mem"
    asynchronous = False

    def __init__(self):
        self.channels: dict = {}  # (src_slot, dst_slot) -> deque of (seq, msg)
        self._seq: dict = {}

    def address(self, slot: int) -> Address:
        return Address("mem", slot)

    def send(self, src_slot: int, dst: Address, msg) -> int:
        key = (src_slot, dst.slot)
        seq = self._seq.get(key, 0) + 1
        self._seq[key] = seq
        q = self.channels.get(key)
        if q is None:
            q = self.channels[key] = deque()
        q.append((seq, msg))
        return seq

    def ready(self) -> list:
        return [k for k, q in self.channels.items() if q]

    def deliver(self, key) -> tuple:
        """Pop the oldest message on channel ``key``: ``(src_slot, dst_slot, seq, msg)``."""
        seq, msg = self.channels[key].popleft()
        return key[0], key[1], seq, msg

    def poll(self, timeout: float) -> list:
        return []

    def in_flight(self) -> int:
        return 0

    def close(self) -> None:
        self.channels.clear()


def update_route(table: dict, role: str, addr: Address) -> dict:
    """Return ``table`` with ``role`` pointing at ``addr``; other entries are untouched."""
    if role not in table:
        raise KeyError(f"unknown role {role}")
    if table[role] == addr:
        return table
    out = dict(table)
    out[role] = addr
    return out
