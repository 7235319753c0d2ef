"""The engineered feature catalog for escalation prediction.

58 named features over five groups describe a PMR at a cutoff instant:

* basic attributes: entry count, days open, ownership level;
* customer perception of process: people in contact, severity movement;
* customer perception of time: response-time experience on this ticket;
* customer profile: the customer's wider history and live workload;
* support analyst profile: the same shape for the ticket's lead analyst.

Profile counts come in five trailing windows (no limit, 12, 24, 36, 48
weeks). Every value is computed from events at or before the cutoff; the
ticket's own artifacts are excluded from its profile features so a row can
never see its own outcome.

Presets select model columns. ``first13`` is the original hand-built set,
``final57`` is the full catalog minus ``days_since_last_contact`` (that one
is surfaced to analysts live but never trained on), and ``baseline`` is the
no-engineering raw representation from the companion module.

Missing-data conventions: undefined time averages are -1.0 (zero minutes is
a legal value, and trees isolate the sentinel with one split); differences
with an undefined side are 0.0; count ratios use 0/0 -> 0 and k/0 -> k.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .domain import (
    EventKind,
    Label,
    MINUTES_PER_DAY,
    MINUTES_PER_WEEK,
    PMR,
    minutes_to_iso,
    iso_to_minutes,
)
from .ingest import CorpusIndex

MISSING = -1.0

WINDOW_WEEKS: tuple[int | None, ...] = (None, 12, 24, 36, 48)
WINDOW_NAMES: tuple[str, ...] = ("inf", "12", "24", "36", "48")

BASIC_FEATURES = ("num_entries", "days_open", "ownership_level")
PROCESS_FEATURES = (
    "num_support_contacts",
    "sev_increases",
    "sev_decreases",
    "sev_to1_transitions",
)
TIME_FEATURES = (
    "time_to_first_contact_min",
    "current_recv_resp_min",
    "diff_current_vs_hist_recv_min",
    "days_since_last_contact",
    "diff_hist_sent_vs_hist_recv_min",
)


def _profile_feature_names(prefix: str, hist_name: str) -> tuple[str, ...]:
    names: list[str] = []
    for base in ("open_pmrs", "closed_pmrs", "open_crits", "closed_crits"):
        names.extend(f"{prefix}_{base}_{w}" for w in WINDOW_NAMES)
    names.append(f"{prefix}_open_crit_pmr_ratio")
    names.append(f"{prefix}_closed_crit_pmr_ratio")
    names.append(hist_name)
    return tuple(names)


CUSTOMER_FEATURES = _profile_feature_names("cust", "cust_hist_recv_resp_min")
ANALYST_FEATURES = _profile_feature_names("analyst", "analyst_hist_sent_resp_min")

ALL_FEATURES: tuple[str, ...] = (
    BASIC_FEATURES + PROCESS_FEATURES + TIME_FEATURES + CUSTOMER_FEATURES + ANALYST_FEATURES
)
assert len(ALL_FEATURES) == 58

FIRST13_FEATURES: tuple[str, ...] = (
    "num_entries",
    "days_open",
    "num_support_contacts",
    "sev_increases",
    "sev_decreases",
    "sev_to1_transitions",
    "time_to_first_contact_min",
    "current_recv_resp_min",
    "diff_current_vs_hist_recv_min",
    "cust_closed_pmrs_inf",
    "cust_closed_crits_inf",
    "cust_closed_crit_pmr_ratio",
    "cust_hist_recv_resp_min",
)

FINAL57_FEATURES: tuple[str, ...] = tuple(
    n for n in ALL_FEATURES if n != "days_since_last_contact"
)
assert len(FINAL57_FEATURES) == 57


class FeatureSetPreset(str, Enum):
    FIRST13 = "first13"
    FINAL57 = "final57"
    BASELINE_RAW = "baseline"


def preset_columns(preset: FeatureSetPreset) -> tuple[str, ...]:
    if preset is FeatureSetPreset.FIRST13:
        return FIRST13_FEATURES
    if preset is FeatureSetPreset.FINAL57:
        return FINAL57_FEATURES
    from .baseline import BASELINE_COLUMNS

    return BASELINE_COLUMNS


class CutoffBeforeOpenError(ValueError):
    pass


def crit_pmr_ratio(crits: int, pmrs: int) -> float:
    """CritSit-to-PMR ratio with 0/0 -> 0 and k/0 -> k (anomalously high, not inf)."""
    if pmrs > 0:
        return crits / pmrs
    return float(crits)


@dataclass(frozen=True)
class EntityProfile:
    """Windowed workload counts and history for one customer or analyst."""

    open_pmrs: int
    closed_pmrs: int
    open_crits: int
    closed_crits: int
    open_crit_pmr_ratio: float
    closed_crit_pmr_ratio: float
    hist_response_min: float  # MISSING when the entity has no closed history


def entity_profile(
    kind: str,
    entity_id: str,
    cutoff: int,
    window_weeks: int | None,
    index: CorpusIndex,
    exclude_pmr: str | None = None,
) -> EntityProfile:
    """Profile one entity at an instant, restricted to a trailing window.

    ``window_weeks`` must be one of WINDOW_WEEKS (None meaning unlimited).
    Open counts window on the open date of artifacts still open at the
    cutoff; closed counts window on the close date. The ratio and history
    fields are computed from this window's counts.
    """
    if window_weeks not in WINDOW_WEEKS:
        raise ValueError(f"window must be one of {WINDOW_WEEKS}, got {window_weeks}")
    window = None if window_weeks is None else window_weeks * MINUTES_PER_WEEK
    open_pmrs, closed_pmrs = index.pmr_counts(kind, entity_id, cutoff, window, exclude_pmr)
    open_crits, closed_crits = index.crit_counts(kind, entity_id, cutoff, window, exclude_pmr)
    total, count = index.hist_response(kind, entity_id, cutoff, exclude_pmr)
    return EntityProfile(
        open_pmrs=open_pmrs,
        closed_pmrs=closed_pmrs,
        open_crits=open_crits,
        closed_crits=closed_crits,
        open_crit_pmr_ratio=crit_pmr_ratio(open_crits, open_pmrs),
        closed_crit_pmr_ratio=crit_pmr_ratio(closed_crits, closed_pmrs),
        hist_response_min=(total / count) if count else MISSING,
    )


@dataclass
class _EventScan:
    num_entries: int
    ownership_level: int
    num_support_contacts: int
    sev_increases: int
    sev_decreases: int
    sev_to1: int
    first_contact_out: int | None
    last_contact: int | None
    resp_sum: int
    resp_cnt: int
    lead_analyst: str | None


def _scan_events(pmr: PMR, cutoff: int) -> _EventScan:
    num_entries = 0
    level = pmr.events[0].level_after
    prev_sev: int | None = None
    sev_inc = sev_dec = sev_to1 = 0
    out_counts: Counter[str] = Counter()
    first_out: int | None = None
    last_contact: int | None = None
    pending_in: list[int] = []
    resp_sum = 0
    resp_cnt = 0
    for e in pmr.events:
        if e.ts > cutoff:
            break
        num_entries += 1
        level = e.level_after
        if e.kind is EventKind.SEVERITY_CHANGE and prev_sev is not None:
            if e.severity_after < prev_sev:
                sev_inc += 1
            elif e.severity_after > prev_sev:
                sev_dec += 1
            if prev_sev >= 2 and e.severity_after == 1:
                sev_to1 += 1
        if e.kind is EventKind.CONTACT_OUT:
            out_counts[e.analyst_id] += 1
            if first_out is None:
                first_out = e.ts
            last_contact = e.ts
            for t_in in pending_in:
                resp_sum += e.ts - t_in
                resp_cnt += 1
            pending_in.clear()
        elif e.kind is EventKind.CONTACT_IN:
            pending_in.append(e.ts)
            last_contact = e.ts
        prev_sev = e.severity_after
    lead = None
    if out_counts:
        top = max(out_counts.values())
        lead = min(a for a, c in out_counts.items() if c == top)
    return _EventScan(
        num_entries=num_entries,
        ownership_level=level.ordinal,
        num_support_contacts=len(out_counts),
        sev_increases=sev_inc,
        sev_decreases=sev_dec,
        sev_to1=sev_to1,
        first_contact_out=first_out,
        last_contact=last_contact,
        resp_sum=resp_sum,
        resp_cnt=resp_cnt,
        lead_analyst=lead,
    )


def _check_cutoff(pmr: PMR, cutoff: int) -> None:
    if cutoff < pmr.open_date:
        raise CutoffBeforeOpenError(f"{pmr.pmr_id}: cutoff {cutoff} before open {pmr.open_date}")
    if pmr.close_date is not None and cutoff > pmr.close_date:
        raise ValueError(f"{pmr.pmr_id}: cutoff {cutoff} after close {pmr.close_date}")


def basic_attributes(pmr: PMR, cutoff: int) -> tuple[int, int, int]:
    """(entry count, whole days open, ownership level 0-3) at the cutoff."""
    _check_cutoff(pmr, cutoff)
    scan = _scan_events(pmr, cutoff)
    days_open = (cutoff - pmr.open_date) // MINUTES_PER_DAY
    return scan.num_entries, days_open, scan.ownership_level


def perception_of_process(pmr: PMR, cutoff: int) -> tuple[int, int, int, int]:
    """(support people in contact, severity increases, decreases, straight-to-1)."""
    _check_cutoff(pmr, cutoff)
    scan = _scan_events(pmr, cutoff)
    return scan.num_support_contacts, scan.sev_increases, scan.sev_decreases, scan.sev_to1


def perception_of_time(
    pmr: PMR,
    cutoff: int,
    customer_profile: EntityProfile,
    analyst_profile: EntityProfile | None,
) -> tuple[float, float, float, float, float]:
    """The five time-experience features; profiles must be at the same cutoff."""
    _check_cutoff(pmr, cutoff)
    scan = _scan_events(pmr, cutoff)
    return _time_features(pmr, cutoff, scan, customer_profile, analyst_profile)


def _time_features(
    pmr: PMR,
    cutoff: int,
    scan: _EventScan,
    customer_profile: EntityProfile,
    analyst_profile: EntityProfile | None,
) -> tuple[float, float, float, float, float]:
    ttfc = float(scan.first_contact_out - pmr.open_date) if scan.first_contact_out is not None else MISSING
    current = (scan.resp_sum / scan.resp_cnt) if scan.resp_cnt else MISSING
    cust_hist = customer_profile.hist_response_min
    diff_cur_hist = cust_hist - current if current != MISSING and cust_hist != MISSING else 0.0
    if scan.last_contact is not None:
        days_since = float((cutoff - scan.last_contact) // MINUTES_PER_DAY)
    else:
        days_since = MISSING
    analyst_hist = analyst_profile.hist_response_min if analyst_profile is not None else MISSING
    diff_hist = cust_hist - analyst_hist if cust_hist != MISSING and analyst_hist != MISSING else 0.0
    return ttfc, current, diff_cur_hist, days_since, diff_hist


_EMPTY_PROFILE = EntityProfile(0, 0, 0, 0, 0.0, 0.0, MISSING)


def compute_all_features(pmr: PMR, cutoff: int, index: CorpusIndex) -> list[float]:
    """All 58 catalog values for one PMR at one cutoff, ordered as ALL_FEATURES."""
    _check_cutoff(pmr, cutoff)
    scan = _scan_events(pmr, cutoff)
    row: list[float] = [
        float(scan.num_entries),
        float((cutoff - pmr.open_date) // MINUTES_PER_DAY),
        float(scan.ownership_level),
        float(scan.num_support_contacts),
        float(scan.sev_increases),
        float(scan.sev_decreases),
        float(scan.sev_to1),
    ]

    cust: list[EntityProfile] = [
        entity_profile("customer", pmr.customer_id, cutoff, w, index, pmr.pmr_id)
        for w in WINDOW_WEEKS
    ]
    if scan.lead_analyst is not None:
        analyst: list[EntityProfile] | None = [
            entity_profile("analyst", scan.lead_analyst, cutoff, w, index, pmr.pmr_id)
            for w in WINDOW_WEEKS
        ]
    else:
        analyst = None

    row.extend(_time_features(pmr, cutoff, scan, cust[0], analyst[0] if analyst else None))

    for profiles in (cust, analyst):
        if profiles is None:
            profiles = [_EMPTY_PROFILE] * len(WINDOW_WEEKS)
        row.extend(float(p.open_pmrs) for p in profiles)
        row.extend(float(p.closed_pmrs) for p in profiles)
        row.extend(float(p.open_crits) for p in profiles)
        row.extend(float(p.closed_crits) for p in profiles)
        inf = profiles[0]
        row.append(inf.open_crit_pmr_ratio)
        row.append(inf.closed_crit_pmr_ratio)
        row.append(inf.hist_response_min)
    return row


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one (PMR, cutoff), masked to a preset."""

    pmr_id: str
    cutoff: int
    is_crit: bool
    preset: FeatureSetPreset
    values: dict[str, float]

    def as_row(self) -> list[float]:
        return [self.values[name] for name in preset_columns(self.preset)]


def featurize_pmr(
    pmr: PMR, label: Label, index: CorpusIndex, preset: FeatureSetPreset = FeatureSetPreset.FINAL57
) -> FeatureVector:
    """Feature vector for one PMR at its label cutoff, masked to the preset."""
    if preset is FeatureSetPreset.BASELINE_RAW:
        from .baseline import baseline_row

        return baseline_row(pmr, label)
    full = compute_all_features(pmr, label.cutoff, index)
    columns = preset_columns(preset)
    by_name = dict(zip(ALL_FEATURES, full))
    return FeatureVector(
        pmr_id=pmr.pmr_id,
        cutoff=label.cutoff,
        is_crit=label.is_crit,
        preset=preset,
        values={name: by_name[name] for name in columns},
    )


def snapshot_series(
    pmr: PMR,
    label: Label,
    index: CorpusIndex,
    model,
    preset: FeatureSetPreset = FeatureSetPreset.FINAL57,
) -> list[tuple[int, float]]:
    """Escalation risk after each entry: one (seq, ER) per event up to the cutoff.

    Snapshot i is the ticket truncated at entry i's timestamp, so the series
    replays how the model would have scored the ticket as it unfolded.
    """
    columns = preset_columns(preset)
    positions = [ALL_FEATURES.index(c) for c in columns]
    rows = []
    seqs = []
    for e in pmr.events:
        if e.ts > label.cutoff:
            break
        full = compute_all_features(pmr, e.ts, index)
        rows.append([full[i] for i in positions])
        seqs.append(e.seq)
    if not rows:
        return []
    ers = model.predict_proba(np.asarray(rows, dtype=np.float64))
    return list(zip(seqs, (float(v) for v in ers)))


# ---------------------------------------------------------------------------
# Feature matrices
# ---------------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    """A model-ready matrix: one row per (PMR, cutoff), columns per preset."""

    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    pmr_ids: list[str]
    cutoffs: np.ndarray
    preset: FeatureSetPreset

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.y), len(self.columns)):
            raise ValueError("matrix shape does not match columns/labels")


def build_matrix(
    pmrs: list[PMR],
    labels: list[Label],
    index: CorpusIndex,
    preset: FeatureSetPreset = FeatureSetPreset.FINAL57,
) -> FeatureMatrix:
    if preset is FeatureSetPreset.BASELINE_RAW:
        from .baseline import build_baseline_matrix

        return build_baseline_matrix(pmrs, labels)
    columns = preset_columns(preset)
    positions = [ALL_FEATURES.index(c) for c in columns]
    X = np.empty((len(pmrs), len(columns)), dtype=np.float64)
    y = np.empty(len(pmrs), dtype=np.int8)
    cutoffs = np.empty(len(pmrs), dtype=np.int64)
    ids: list[str] = []
    for i, (pmr, label) in enumerate(zip(pmrs, labels)):
        full = compute_all_features(pmr, label.cutoff, index)
        for j, pos in enumerate(positions):
            X[i, j] = full[pos]
        y[i] = 1 if label.is_crit else 0
        cutoffs[i] = label.cutoff
        ids.append(pmr.pmr_id)
    return FeatureMatrix(columns=columns, X=X, y=y, pmr_ids=ids, cutoffs=cutoffs, preset=preset)


def write_matrix_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pmr_id", "cutoff", *matrix.columns, "is_crit"])
        for i in range(len(matrix.y)):
            row = [matrix.pmr_ids[i], minutes_to_iso(int(matrix.cutoffs[i]))]
            row.extend(repr(float(v)) for v in matrix.X[i])
            row.append(str(int(matrix.y[i])))
            writer.writerow(row)


def read_matrix_csv(path: str | Path, preset: FeatureSetPreset | None = None) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["pmr_id", "cutoff"] or header[-1] != "is_crit":
            raise ValueError("not a feature matrix file")
        columns = tuple(header[2:-1])
        ids: list[str] = []
        cutoffs: list[int] = []
        rows: list[list[float]] = []
        ys: list[int] = []
        for rec in reader:
            ids.append(rec[0])
            cutoffs.append(iso_to_minutes(rec[1]))
            rows.append([float(v) for v in rec[2:-1]])
            ys.append(int(rec[-1]))
    if preset is None:
        for candidate in FeatureSetPreset:
            if preset_columns(candidate) == columns:
                preset = candidate
                break
        else:
            raise ValueError("matrix columns match no known preset")
    X = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(columns)))
    return FeatureMatrix(
        columns=columns,
        X=X,
        y=np.asarray(ys, dtype=np.int8),
        pmr_ids=ids,
        cutoffs=np.asarray(cutoffs, dtype=np.int64),
        preset=preset,
    )
