"""Last-entry raw representation: the no-feature-engineering comparison point.

Each PMR becomes exactly one row taken verbatim from the last event before
its cutoff plus the ticket header. Nothing is aggregated across events;
that restraint is the whole point. Identifier strings are excluded as model
input except as stable integer hashes, and timestamps are decomposed into
calendar parts since a raw ISO string is useless to a tree.

The source schema here is smaller than a real ticket system's, so the
column census is what the synthetic schema yields (21 usable columns), not
a fixed-width contract.
"""

from __future__ import annotations

import zlib
from datetime import datetime, timezone

import numpy as np

from .domain import EventKind, EventRecord, Label, PMR

_KIND_CODE = {kind: i for i, kind in enumerate(EventKind)}

_CALENDAR_PARTS = ("year", "month", "day", "weekday", "hour", "minute", "week")

BASELINE_COLUMNS: tuple[str, ...] = (
    "last_seq",
    "last_kind",
    "last_severity",
    "last_level",
    "last_has_analyst",
    "last_analyst_hash",
    "customer_hash",
    *(f"last_ts_{p}" for p in _CALENDAR_PARTS),
    *(f"open_ts_{p}" for p in _CALENDAR_PARTS),
)


def stable_id_hash(identifier: str) -> int:
    """Deterministic 32-bit hash for identifier columns (CRC32, not salted)."""
    return zlib.crc32(identifier.encode("utf-8"))


def _calendar_parts(ts_min: int) -> list[float]:
    dt = datetime.fromtimestamp(ts_min * 60, tz=timezone.utc)
    return [
        float(dt.year),
        float(dt.month),
        float(dt.day),
        float(dt.weekday()),
        float(dt.hour),
        float(dt.minute),
        float(dt.isocalendar().week),
    ]


def _qualifying_event(pmr: PMR, cutoff: int) -> EventRecord:
    chosen = None
    for e in pmr.events:
        if e.ts > cutoff:
            break
        chosen = e
    if chosen is None:
        raise ValueError(f"{pmr.pmr_id}: no event at or before cutoff {cutoff}")
    return chosen


def baseline_values(pmr: PMR, label: Label) -> list[float]:
    """Raw row values for one PMR, ordered as BASELINE_COLUMNS."""
    e = _qualifying_event(pmr, label.cutoff)
    row = [
        float(e.seq),
        float(_KIND_CODE[e.kind]),
        float(e.severity_after),
        float(e.level_after.ordinal),
        1.0 if e.analyst_id else 0.0,
        float(stable_id_hash(e.analyst_id)) if e.analyst_id else 0.0,
        float(stable_id_hash(pmr.customer_id)),
    ]
    row.extend(_calendar_parts(e.ts))
    row.extend(_calendar_parts(pmr.open_date))
    return row


def baseline_row(pmr: PMR, label: Label):
    """One raw FeatureVector (preset ``baseline``) for the PMR."""
    from .featurize import FeatureSetPreset, FeatureVector

    return FeatureVector(
        pmr_id=pmr.pmr_id,
        cutoff=label.cutoff,
        is_crit=label.is_crit,
        preset=FeatureSetPreset.BASELINE_RAW,
        values=dict(zip(BASELINE_COLUMNS, baseline_values(pmr, label))),
    )


def build_baseline_matrix(pmrs: list[PMR], labels: list[Label]):
    from .featurize import FeatureMatrix, FeatureSetPreset

    X = np.empty((len(pmrs), len(BASELINE_COLUMNS)), dtype=np.float64)
    y = np.empty(len(pmrs), dtype=np.int8)
    cutoffs = np.empty(len(pmrs), dtype=np.int64)
    ids: list[str] = []
    for i, (pmr, label) in enumerate(zip(pmrs, labels)):
        X[i, :] = baseline_values(pmr, label)
        y[i] = 1 if label.is_crit else 0
        cutoffs[i] = label.cutoff
        ids.append(pmr.pmr_id)
    return FeatureMatrix(
        columns=BASELINE_COLUMNS,
        X=X,
        y=y,
        pmr_ids=ids,
        cutoffs=cutoffs,
        preset=FeatureSetPreset.BASELINE_RAW,
    )
