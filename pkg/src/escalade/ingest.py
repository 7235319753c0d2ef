"""Event-log and CritSit-registry files, plus the corpus index.

File formats (JSON Lines, UTF-8, gzip accepted by ``.gz`` extension):

    events.jsonl   one event per line:
        {"pmr_id": ..., "seq": 1, "ts": "2024-03-01T09:30Z", "kind": "OPEN",
         "severity": 3, "level": "L0", "analyst_id": null, "customer_id": ...}
    critsits.jsonl one escalation per line:
        {"critsit_id": ..., "customer_id": ..., "open_ts": "...", "pmr_ids": [...]}

Parsing is strict by default: the first structural error rejects the file.
``lenient=True`` drops offending PMRs instead, for salvaging dirty exports.

The corpus index answers the per-entity questions behind the customer and
analyst profile features (how many PMRs/CritSits were open at an instant,
closed within a trailing window, historical response times) without
rescanning raw event streams. Index answers are required to match a
brute-force scan of the raw lists exactly; the test suite holds it to that.
"""

from __future__ import annotations

import gzip
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import (
    CritSit,
    EventKind,
    EventRecord,
    PMR,
    SupportLevel,
    iso_to_minutes,
    minutes_to_iso,
    received_response_samples,
)

# Close timestamp used for still-open artifacts so "closed before t" is never true.
NEVER_CLOSED = 2**62

_EVENT_KEYS = ("pmr_id", "seq", "ts", "kind", "severity", "level", "analyst_id", "customer_id")


class IngestError(Exception):
    pass


class EventLogSyntaxError(IngestError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class OrderingError(IngestError):
    def __init__(self, pmr_id: str, message: str):
        super().__init__(f"{pmr_id}: {message}")
        self.pmr_id = pmr_id


class OrphanEventError(IngestError):
    def __init__(self, pmr_id: str, message: str):
        super().__init__(f"{pmr_id}: {message}")
        self.pmr_id = pmr_id


class UnknownEntityError(KeyError):
    pass


def _open_text(path: str | Path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        if "r" in mode:
            return gzip.open(path, "rt", encoding="utf-8")
        # mtime pinned to zero so identical corpora produce identical bytes
        raw = open(path, "wb")
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return io.TextIOWrapper(gz, encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n" if "w" in mode else None)


def _event_from_obj(obj: dict, line_no: int) -> EventRecord:
    try:
        kind = EventKind(obj["kind"])
        level = SupportLevel(obj["level"])
        analyst = obj.get("analyst_id")
        return EventRecord(
            pmr_id=str(obj["pmr_id"]),
            seq=int(obj["seq"]),
            ts=iso_to_minutes(obj["ts"]),
            kind=kind,
            severity_after=int(obj["severity"]),
            level_after=level,
            customer_id=str(obj["customer_id"]),
            analyst_id=str(analyst) if analyst is not None else None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise EventLogSyntaxError(line_no, f"bad event record: {exc}") from exc


def parse_event_log(path: str | Path, lenient: bool = False) -> list[PMR]:
    """Read an event log into validated PMRs, in first-seen order."""
    groups: dict[str, list[EventRecord]] = {}
    bad: set[str] = set()

    def fail(exc: IngestError, pmr_id: str | None) -> None:
        if not lenient:
            raise exc
        if pmr_id is not None:
            bad.add(pmr_id)

    with _open_text(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                fail(EventLogSyntaxError(line_no, f"invalid JSON: {exc}"), None)
                continue
            if not isinstance(obj, dict):
                fail(EventLogSyntaxError(line_no, "event must be a JSON object"), None)
                continue
            try:
                event = _event_from_obj(obj, line_no)
            except EventLogSyntaxError as exc:
                fail(exc, str(obj.get("pmr_id")) if obj.get("pmr_id") else None)
                continue
            pid = event.pmr_id
            if pid in bad:
                continue
            prior = groups.get(pid)
            if prior is None:
                if event.kind is not EventKind.OPEN:
                    fail(OrphanEventError(pid, f"first event is {event.kind.value}, not OPEN"), pid)
                    continue
                groups[pid] = [event]
                continue
            last = prior[-1]
            if last.kind is EventKind.CLOSE:
                fail(OrphanEventError(pid, "event after CLOSE"), pid)
                continue
            if event.seq <= last.seq:
                fail(OrderingError(pid, f"seq {last.seq} -> {event.seq} not increasing"), pid)
                continue
            if event.ts < last.ts:
                fail(OrderingError(pid, f"timestamp decreases at seq={event.seq}"), pid)
                continue
            prior.append(event)

    pmrs = []
    for pid, events in groups.items():
        if pid in bad:
            continue
        pmrs.append(PMR.from_events(events))
    return pmrs


def write_event_log(pmrs: list[PMR], path: str | Path) -> None:
    """Write PMR event streams, one canonical JSON object per line."""
    with _open_text(path, "w") as fh:
        for pmr in pmrs:
            for e in pmr.events:
                obj = {
                    "pmr_id": e.pmr_id,
                    "seq": e.seq,
                    "ts": minutes_to_iso(e.ts),
                    "kind": e.kind.value,
                    "severity": e.severity_after,
                    "level": e.level_after.value,
                    "analyst_id": e.analyst_id,
                    "customer_id": e.customer_id,
                }
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def parse_critsit_log(path: str | Path) -> list[CritSit]:
    critsits = []
    with _open_text(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                critsits.append(
                    CritSit(
                        critsit_id=str(obj["critsit_id"]),
                        customer_id=str(obj["customer_id"]),
                        open_date=iso_to_minutes(obj["open_ts"]),
                        attached_pmr_ids=frozenset(str(p) for p in obj["pmr_ids"]),
                    )
                )
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                raise EventLogSyntaxError(line_no, f"bad CritSit record: {exc}") from exc
    return critsits


def write_critsit_log(critsits: list[CritSit], path: str | Path) -> None:
    with _open_text(path, "w") as fh:
        for c in critsits:
            obj = {
                "critsit_id": c.critsit_id,
                "customer_id": c.customer_id,
                "open_ts": minutes_to_iso(c.open_date),
                "pmr_ids": sorted(c.attached_pmr_ids),
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Corpus index
# ---------------------------------------------------------------------------


@dataclass
class _IntervalTable:
    """Open/close intervals for one entity's artifacts, plus response sums.

    ``opens``/``closes`` are parallel arrays sorted by open date (close is
    NEVER_CLOSED while the artifact is open). ``by_close`` re-sorts closed
    artifacts by close date and carries prefix sums of per-PMR response
    minutes so historical averages are O(log n).
    """

    ids: list[str] = field(default_factory=list)
    opens: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    closes: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    close_sorted: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    resp_sum_prefix: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))
    resp_cnt_prefix: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))

    @classmethod
    def build(cls, rows: list[tuple[str, int, int | None, int, int]]) -> "_IntervalTable":
        """rows: (id, open, close_or_None, resp_sum, resp_cnt), any order."""
        rows = sorted(rows, key=lambda r: (r[1], r[0]))
        ids = [r[0] for r in rows]
        opens = np.array([r[1] for r in rows], np.int64)
        closes = np.array([NEVER_CLOSED if r[2] is None else r[2] for r in rows], np.int64)
        closed = sorted((r for r in rows if r[2] is not None), key=lambda r: (r[2], r[0]))
        close_sorted = np.array([r[2] for r in closed], np.int64)
        resp_sum_prefix = np.zeros(len(closed) + 1, np.int64)
        resp_cnt_prefix = np.zeros(len(closed) + 1, np.int64)
        for i, r in enumerate(closed):
            resp_sum_prefix[i + 1] = resp_sum_prefix[i] + r[3]
            resp_cnt_prefix[i + 1] = resp_cnt_prefix[i] + r[4]
        return cls(ids, opens, closes, close_sorted, resp_sum_prefix, resp_cnt_prefix)

    def open_count(self, t: int, window: int | None) -> int:
        """Artifacts opened within the window ending at t and still open at t."""
        hi = int(np.searchsorted(self.opens, t, side="right"))
        lo = 0 if window is None else int(np.searchsorted(self.opens, t - window, side="right"))
        if lo >= hi:
            return 0
        return int(np.count_nonzero(self.closes[lo:hi] > t))

    def closed_count(self, t: int, window: int | None) -> int:
        """Artifacts whose close falls within the window ending at t."""
        hi = int(np.searchsorted(self.close_sorted, t, side="right"))
        lo = 0 if window is None else int(np.searchsorted(self.close_sorted, t - window, side="right"))
        return max(0, hi - lo)

    def response_totals(self, t: int) -> tuple[int, int]:
        """(sum, count) of response minutes over artifacts closed at or before t."""
        hi = int(np.searchsorted(self.close_sorted, t, side="right"))
        return int(self.resp_sum_prefix[hi]), int(self.resp_cnt_prefix[hi])


@dataclass
class _CritTable:
    """Per-entity CritSit intervals; a CritSit stays open until the close of
    its last attached PMR."""

    opens: np.ndarray
    closes: np.ndarray
    attached: list[frozenset[str]]
    close_sorted: np.ndarray
    attached_by_close: list[frozenset[str]]

    @classmethod
    def build(cls, rows: list[tuple[int, int, frozenset[str]]]) -> "_CritTable":
        rows = sorted(rows, key=lambda r: r[0])
        opens = np.array([r[0] for r in rows], np.int64)
        closes = np.array([r[1] for r in rows], np.int64)
        attached = [r[2] for r in rows]
        closed = sorted((r for r in rows if r[1] != NEVER_CLOSED), key=lambda r: r[1])
        close_sorted = np.array([r[1] for r in closed], np.int64)
        attached_by_close = [r[2] for r in closed]
        return cls(opens, closes, attached, close_sorted, attached_by_close)

    def open_count(self, t: int, window: int | None, exclude_pmr: str | None) -> int:
        hi = int(np.searchsorted(self.opens, t, side="right"))
        lo = 0 if window is None else int(np.searchsorted(self.opens, t - window, side="right"))
        if lo >= hi:
            return 0
        n = int(np.count_nonzero(self.closes[lo:hi] > t))
        if exclude_pmr is not None and n:
            for i in range(lo, hi):
                if self.closes[i] > t and exclude_pmr in self.attached[i]:
                    n -= 1
        return n

    def closed_count(self, t: int, window: int | None, exclude_pmr: str | None) -> int:
        hi = int(np.searchsorted(self.close_sorted, t, side="right"))
        lo = 0 if window is None else int(np.searchsorted(self.close_sorted, t - window, side="right"))
        n = max(0, hi - lo)
        if exclude_pmr is not None and n:
            for i in range(lo, hi):
                if exclude_pmr in self.attached_by_close[i]:
                    n -= 1
        return n


def _critsit_close(critsit: CritSit, pmr_by_id: dict[str, PMR]) -> int:
    close = 0
    for pid in critsit.attached_pmr_ids:
        pmr = pmr_by_id.get(pid)
        if pmr is None or pmr.close_date is None:
            return NEVER_CLOSED
        close = max(close, pmr.close_date)
    return close


@dataclass
class CorpusIndex:
    """Immutable lookup structure over a parsed corpus.

    Customers own the PMRs they filed; analysts own the PMRs they lead. A
    CritSit belongs to its customer and to every analyst leading one of its
    attached PMRs. All profile queries can exclude one target PMR (and any
    CritSit attached to it) so a ticket never sees its own outcome.
    """

    pmr_by_id: dict[str, PMR]
    critsits: list[CritSit]
    customer_ids: frozenset[str]
    analyst_ids: frozenset[str]
    _cust_pmrs: dict[str, _IntervalTable]
    _analyst_pmrs: dict[str, _IntervalTable]
    _cust_crits: dict[str, _CritTable]
    _analyst_crits: dict[str, _CritTable]
    _resp_by_pmr: dict[str, tuple[int, int]]
    critsits_by_pmr: dict[str, list[CritSit]]

    # -- profile queries ---------------------------------------------------

    def _pmr_table(self, kind: str, entity_id: str) -> _IntervalTable:
        if kind == "customer":
            if entity_id not in self.customer_ids:
                raise UnknownEntityError(entity_id)
            return self._cust_pmrs.get(entity_id) or _IntervalTable.build([])
        if kind == "analyst":
            if entity_id not in self.analyst_ids:
                raise UnknownEntityError(entity_id)
            return self._analyst_pmrs.get(entity_id) or _IntervalTable.build([])
        raise ValueError(f"unknown entity kind {kind!r}")

    def _crit_table(self, kind: str, entity_id: str) -> _CritTable:
        table = (self._cust_crits if kind == "customer" else self._analyst_crits).get(entity_id)
        return table or _CritTable.build([])

    def _excluded_pmr_row(self, kind: str, entity_id: str, exclude_pmr: str | None):
        if exclude_pmr is None:
            return None
        pmr = self.pmr_by_id.get(exclude_pmr)
        if pmr is None:
            return None
        if kind == "customer" and pmr.customer_id != entity_id:
            return None
        if kind == "analyst" and pmr.lead_analyst_id != entity_id:
            return None
        return pmr

    def pmr_counts(
        self, kind: str, entity_id: str, t: int, window: int | None, exclude_pmr: str | None = None
    ) -> tuple[int, int]:
        """(open, closed) PMR counts for the entity at instant t."""
        table = self._pmr_table(kind, entity_id)
        n_open = table.open_count(t, window)
        n_closed = table.closed_count(t, window)
        target = self._excluded_pmr_row(kind, entity_id, exclude_pmr)
        if target is not None:
            lo_ok = window is None or target.open_date > t - window
            if target.open_date <= t and lo_ok:
                close = NEVER_CLOSED if target.close_date is None else target.close_date
                if close > t:
                    n_open -= 1
            if target.close_date is not None and target.close_date <= t:
                if window is None or target.close_date > t - window:
                    n_closed -= 1
        return n_open, n_closed

    def crit_counts(
        self, kind: str, entity_id: str, t: int, window: int | None, exclude_pmr: str | None = None
    ) -> tuple[int, int]:
        """(open, closed) CritSit counts for the entity at instant t."""
        self._pmr_table(kind, entity_id)  # entity existence check
        table = self._crit_table(kind, entity_id)
        return (
            table.open_count(t, window, exclude_pmr),
            table.closed_count(t, window, exclude_pmr),
        )

    def hist_response(
        self, kind: str, entity_id: str, t: int, exclude_pmr: str | None = None
    ) -> tuple[int, int]:
        """(sum, count) of response minutes over the entity's PMRs closed by t."""
        table = self._pmr_table(kind, entity_id)
        total, count = table.response_totals(t)
        target = self._excluded_pmr_row(kind, entity_id, exclude_pmr)
        if target is not None and target.close_date is not None and target.close_date <= t:
            s, c = self._resp_by_pmr[target.pmr_id]
            total -= s
            count -= c
        return total, count


def build_index(pmrs: list[PMR], critsits: list[CritSit]) -> CorpusIndex:
    pmr_by_id = {p.pmr_id: p for p in pmrs}
    if len(pmr_by_id) != len(pmrs):
        raise IngestError("duplicate pmr_id in corpus")

    resp_by_pmr: dict[str, tuple[int, int]] = {}
    for p in pmrs:
        samples = received_response_samples(p.events)
        resp_by_pmr[p.pmr_id] = (sum(samples), len(samples))

    cust_rows: dict[str, list] = {}
    analyst_rows: dict[str, list] = {}
    analyst_ids: set[str] = set()
    for p in pmrs:
        s, c = resp_by_pmr[p.pmr_id]
        cust_rows.setdefault(p.customer_id, []).append((p.pmr_id, p.open_date, p.close_date, s, c))
        if p.lead_analyst_id is not None:
            analyst_rows.setdefault(p.lead_analyst_id, []).append(
                (p.pmr_id, p.open_date, p.close_date, s, c)
            )
        for e in p.events:
            if e.analyst_id:
                analyst_ids.add(e.analyst_id)

    cust_crit_rows: dict[str, list] = {}
    analyst_crit_rows: dict[str, list] = {}
    critsits_by_pmr: dict[str, list[CritSit]] = {}
    for c in critsits:
        close = _critsit_close(c, pmr_by_id)
        cust_crit_rows.setdefault(c.customer_id, []).append((c.open_date, close, c.attached_pmr_ids))
        leads = set()
        for pid in c.attached_pmr_ids:
            critsits_by_pmr.setdefault(pid, []).append(c)
            pmr = pmr_by_id.get(pid)
            if pmr is not None and pmr.lead_analyst_id is not None:
                leads.add(pmr.lead_analyst_id)
        for lead in leads:
            analyst_crit_rows.setdefault(lead, []).append((c.open_date, close, c.attached_pmr_ids))

    return CorpusIndex(
        pmr_by_id=pmr_by_id,
        critsits=list(critsits),
        customer_ids=frozenset(cust_rows),
        analyst_ids=frozenset(analyst_ids),
        _cust_pmrs={k: _IntervalTable.build(v) for k, v in cust_rows.items()},
        _analyst_pmrs={k: _IntervalTable.build(v) for k, v in analyst_rows.items()},
        _cust_crits={k: _CritTable.build(v) for k, v in cust_crit_rows.items()},
        _analyst_crits={k: _CritTable.build(v) for k, v in analyst_crit_rows.items()},
        _resp_by_pmr=resp_by_pmr,
        critsits_by_pmr=critsits_by_pmr,
    )
