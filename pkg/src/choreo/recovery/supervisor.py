"""Session teardown on unrecoverable failure."""

from __future__ import annotations

from ..lang.interp import SessionAborted


class Supervisor:
    """Tears a session down exactly once; monitor, actors and caller share its fate."""

    def __init__(self, session: "Session"):
        self.session = session
        self.reason = None

    def teardown(self, reason: str) -> None:
        if self.reason is not None:
            return
        self.reason = reason
        s = self.session
        for a in s.all_actors:
            if a.status != "finished":
                a.status = "stopped"
            a.control.clear()
        s.monitor_inbox.clear()
        s.status = "aborted"
        s.error = SessionAborted(reason)
        s.emit_monitor("abort", reason=reason)
