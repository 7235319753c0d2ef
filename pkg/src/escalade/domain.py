"""Core data model for support tickets and escalations.

A PMR (problem management record) is a time-ordered stream of events from
OPEN to CLOSE. A CritSit is the escalation artifact; a PMR "crits" when it
is attached to one. Everything downstream (feature engineering, training,
the triage service) speaks in terms of these types.

Timestamps are integer minutes since the Unix epoch, UTC. Minute resolution
is deliberate: every time-based feature is expressed in minutes or whole
days, and integer arithmetic keeps feature computation exact.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

MINUTES_PER_DAY = 1440
MINUTES_PER_WEEK = 7 * MINUTES_PER_DAY

_TS_FORMAT = "%Y-%m-%dT%H:%M%z"


class DomainError(Exception):
    """Base class for invariant violations in the ticket model."""


class NoEventsError(DomainError):
    """Raised when an operation requires a PMR with at least one event."""


def minutes_to_iso(ts: int) -> str:
    """Render minutes-since-epoch as an ISO-8601 UTC string, e.g. 2024-03-01T09:30Z."""
    dt = datetime.fromtimestamp(ts * 60, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M") + "Z"


def iso_to_minutes(text: str) -> int:
    """Parse an ISO-8601 UTC instant (minute resolution) to minutes-since-epoch."""
    dt = datetime.strptime(text, _TS_FORMAT)
    return int(dt.timestamp()) // 60


class EventKind(str, Enum):
    OPEN = "OPEN"
    CONTACT_IN = "CONTACT_IN"    # customer -> support
    CONTACT_OUT = "CONTACT_OUT"  # support -> customer
    SEVERITY_CHANGE = "SEVERITY_CHANGE"
    OWNERSHIP_CHANGE = "OWNERSHIP_CHANGE"
    NOTE = "NOTE"
    CLOSE = "CLOSE"


class SupportLevel(str, Enum):
    L0 = "L0"
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"

    @property
    def ordinal(self) -> int:
        return int(self.value[1])


def validate_severity(value: int) -> int:
    """Severity runs 4..1 with 1 the most severe; anything else is invalid."""
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 4:
        raise DomainError(f"severity must be an integer in [1, 4], got {value!r}")
    return value


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One timestamped action on a PMR.

    ``severity_after`` and ``level_after`` are the ticket state once the
    event has been applied, so any event carries the full visible state.
    ``analyst_id`` is required for CONTACT_OUT and optional elsewhere.
    """

    pmr_id: str
    seq: int
    ts: int
    kind: EventKind
    severity_after: int
    level_after: SupportLevel
    customer_id: str
    analyst_id: str | None = None

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise DomainError(f"{self.pmr_id}: seq must be >= 1, got {self.seq}")
        validate_severity(self.severity_after)
        if self.kind is EventKind.CONTACT_OUT and not self.analyst_id:
            raise DomainError(f"{self.pmr_id}: CONTACT_OUT event missing analyst_id")


@dataclass(frozen=True)
class PMR:
    """A support ticket: an ordered event stream plus derived header fields."""

    pmr_id: str
    customer_id: str
    open_date: int
    close_date: int | None
    events: tuple[EventRecord, ...]
    lead_analyst_id: str | None = field(default=None, compare=False)

    @classmethod
    def from_events(cls, events: list[EventRecord] | tuple[EventRecord, ...]) -> "PMR":
        """Build a validated PMR from its event stream.

        Enforces: non-empty, single pmr_id/customer_id, strictly increasing
        seq, non-decreasing timestamps, OPEN first, CLOSE (when present)
        last and unique.
        """
        if not events:
            raise NoEventsError("cannot build a PMR from an empty event list")
        events = tuple(events)
        first = events[0]
        if first.kind is not EventKind.OPEN:
            raise DomainError(f"{first.pmr_id}: first event must be OPEN, got {first.kind.value}")
        for prev, cur in zip(events, events[1:]):
            if cur.pmr_id != first.pmr_id:
                raise DomainError(f"mixed pmr_ids in event stream: {first.pmr_id} / {cur.pmr_id}")
            if cur.customer_id != first.customer_id:
                raise DomainError(f"{first.pmr_id}: customer_id changes mid-stream")
            if cur.seq <= prev.seq:
                raise DomainError(f"{first.pmr_id}: seq not strictly increasing at seq={cur.seq}")
            if cur.ts < prev.ts:
                raise DomainError(f"{first.pmr_id}: timestamps decrease at seq={cur.seq}")
            if prev.kind is EventKind.CLOSE:
                raise DomainError(f"{first.pmr_id}: events after CLOSE")
            if cur.kind is EventKind.OPEN:
                raise DomainError(f"{first.pmr_id}: duplicate OPEN at seq={cur.seq}")
        close_date = events[-1].ts if events[-1].kind is EventKind.CLOSE else None
        return cls(
            pmr_id=first.pmr_id,
            customer_id=first.customer_id,
            open_date=first.ts,
            close_date=close_date,
            events=events,
            lead_analyst_id=derive_lead_analyst_from_events(events),
        )

    @property
    def is_closed(self) -> bool:
        return self.close_date is not None


@dataclass(frozen=True)
class CritSit:
    """An escalation artifact attaching one or more PMRs of a single customer."""

    critsit_id: str
    customer_id: str
    open_date: int
    attached_pmr_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.attached_pmr_ids:
            raise DomainError(f"{self.critsit_id}: attached PMR set must be non-empty")


@dataclass(frozen=True)
class Label:
    """Target class for one PMR plus the instant features may see up to."""

    is_crit: bool
    cutoff: int


class CritSitKind(str, Enum):
    SINGLE = "SINGLE"  # one attached PMR: the known cause
    MULTI = "MULTI"    # several attached: cause and cascades, indistinguishable


def derive_lead_analyst_from_events(events: tuple[EventRecord, ...]) -> str | None:
    """Modal analyst over CONTACT_OUT events; ties go to the smallest id."""
    counts = Counter(
        e.analyst_id for e in events if e.kind is EventKind.CONTACT_OUT and e.analyst_id
    )
    if not counts:
        return None
    top = max(counts.values())
    return min(a for a, c in counts.items() if c == top)


def derive_lead_analyst(pmr: PMR) -> str | None:
    """The analyst who contacted the customer most on this PMR, or None."""
    return derive_lead_analyst_from_events(pmr.events)


def label_pmr(pmr: PMR, critsits: list[CritSit] | tuple[CritSit, ...]) -> Label:
    """Label a PMR and fix its feature cutoff instant.

    A PMR is positive iff it appears in any CritSit's attached set. The
    cutoff is the timestamp of the last event strictly before the CritSit
    open date (earliest CritSit when attached to several), or strictly
    before the close date for negatives. When no event qualifies the cutoff
    clamps to the open date instead of discarding the PMR.
    """
    if not pmr.events:
        raise NoEventsError(f"{pmr.pmr_id}: no events to label")
    crit_opens = [c.open_date for c in critsits if pmr.pmr_id in c.attached_pmr_ids]
    if crit_opens:
        boundary = min(crit_opens)
        is_crit = True
    else:
        if pmr.close_date is None:
            raise DomainError(f"{pmr.pmr_id}: cannot label an open PMR that never crit")
        boundary = pmr.close_date
        is_crit = False
    cutoff = pmr.open_date
    for e in pmr.events:
        if e.ts < boundary:
            cutoff = e.ts
        else:
            break
    return Label(is_crit=is_crit, cutoff=cutoff)


def classify_critsit(critsit: CritSit) -> CritSitKind:
    """SINGLE (one attached PMR, known cause) or MULTI (ambiguous cause/cascade)."""
    return CritSitKind.SINGLE if len(critsit.attached_pmr_ids) == 1 else CritSitKind.MULTI


def received_response_samples(
    events: tuple[EventRecord, ...], cutoff: int | None = None
) -> list[int]:
    """Response-time samples in minutes: each CONTACT_IN to the next CONTACT_OUT.

    Several inbound messages answered by one reply each yield a sample. A
    CONTACT_IN with no later CONTACT_OUT contributes nothing. With a cutoff,
    only pairs completed at or before the cutoff count.
    """
    samples: list[int] = []
    pending: list[int] = []
    for e in events:
        if cutoff is not None and e.ts > cutoff:
            break
        if e.kind is EventKind.CONTACT_IN:
            pending.append(e.ts)
        elif e.kind is EventKind.CONTACT_OUT:
            samples.extend(e.ts - t_in for t_in in pending)
            pending.clear()
    return samples
