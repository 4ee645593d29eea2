"""Session trace: one event per observable step, for assertions and ``--trace``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..lang.values import format_value
from ..projection.ir import ContinuationToken

EVENT_KINDS = (
    "send", "recv", "choice_send", "choice_recv", "ckpt_enter", "ckpt_done", "barrier",
    "barrier_pass", "crash", "revive", "recover", "rescue_enter", "finish", "drop", "abort",
    "block",
)


@dataclass(frozen=True)
class TraceEvent:
    t: int
    session: str
    role: str
    kind: str
    detail: dict = field(hash=False, default_factory=dict)

    def to_json(self) -> dict:
        return {"t": self.t, "session": self.session, "role": self.role, "event": self.kind,
                **{k: _jsonable(v) for k, v in self.detail.items()}}

    def to_text(self) -> str:
        parts = " ".join(f"{k}={_text(v)}" for k, v in self.detail.items())
        return f"{self.t} {self.role} {self.kind} {parts}".rstrip()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): format_value(x) for k, x in v.items()}
    if isinstance(v, ContinuationToken):
        return str(v)
    if isinstance(v, (int, str)) and not isinstance(v, bool) or v is None:
        return v
    if isinstance(v, tuple) and all(isinstance(x, int) for x in v):
        return list(v)
    try:
        return format_value(v)
    except TypeError:
        return repr(v)


def _text(v) -> str:
    if isinstance(v, dict):
        return "{" + ",".join(f"{k}:{format_value(x)}" for k, x in sorted(v.items())) + "}"
    if isinstance(v, ContinuationToken):
        return str(v)
    try:
        return format_value(v)
    except TypeError:
        return repr(v)


class Trace:
    """An append-only event log shared by every actor and the monitor of a world."""

    def __init__(self, enabled: bool = True, blocks: bool = False):
        self.enabled = enabled
        self.blocks = blocks
        self.events: list = []
        self.clock = 0

    def emit(self, session: str, role: str, kind: str, **detail) -> None:
        self.clock += 1
        if self.enabled and (kind != "block" or self.blocks):
            self.events.append(TraceEvent(self.clock, session, role, kind, detail))

    def of(self, kind: str, session: str | None = None) -> list:
        return [e for e in self.events if e.kind == kind and (session is None or e.session == session)]

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.events:
                fh.write(json.dumps(e.to_json(), sort_keys=False) + "\n")

    def text_lines(self) -> list:
        return [e.to_text() for e in self.events]
