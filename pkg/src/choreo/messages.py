"""Message and CIV-token formats exchanged between actors and the monitor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

CHOREX = "chorex"
CHOICE = "choice"
REVIVE = "revive"
RECOVER = "recover"
BARRIER = "barrier"

MESSAGE_TYPES = (CHOREX, CHOICE, REVIVE, RECOVER, BARRIER)
CONTROL_TYPES = frozenset({REVIVE, RECOVER, BARRIER})


@dataclass(frozen=True)
class CivToken:
    """Communication-integrity token ``{session, metadata, sender, receiver}``.

    ``metadata`` is the send-site id plus the attempt epoch, so messages from
    an aborted checkpoint attempt never satisfy a receive of a later attempt.
    """

    session: str
    site: int
    epoch: int
    sender: str
    receiver: str

    @property
    def metadata(self) -> tuple:
        return (self.site, self.epoch)


@dataclass(frozen=True)
class Message:
    mtype: str
    civ: Optional[CivToken]
    payload: Any

    def __post_init__(self):
        if self.mtype not in MESSAGE_TYPES:
            raise ValueError(f"unknown message type {self.mtype!r}")
        if self.mtype == REVIVE and self.civ is not None:
            raise ValueError("revive messages carry no CIV token")
        if self.mtype in (CHOREX, CHOICE) and self.civ is None:
            raise ValueError(f"{self.mtype} messages need a CIV token")

    @property
    def is_control(self) -> bool:
        return self.mtype in CONTROL_TYPES
