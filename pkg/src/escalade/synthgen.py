"""Deterministic synthetic support corpora with a planted escalation signal.

Real escalation data is proprietary wherever it exists, so experiments here
run on generated corpora whose signal is known by construction. Each ticket
gets an event stream first (contacts, severity movement, ownership changes,
notes); escalation is then decided per ticket by a logistic model over
planted drivers, all of which are measurable from the stream:

* the customer's realized CritSit-to-PMR ratio over a trailing window,
* whether the customer has another CritSit open right now (escalations
  beget escalations while the fire is still burning),
* the gap between this ticket's received response times and what the
  customer's usual analyst pool would predict,
* the realized count of severity increases.

Customers also move through latent "troubled phases" (bounded intervals of
elevated escalation propensity), so escalations arrive in bursts and
recent history carries more information than lifetime totals.

``signal_strength`` scales the drivers' coefficients; at zero, escalation
is a constant-rate coin and no representation should beat chance. The
intercept is calibrated by bisection so the realized positive fraction
lands within 20% (relative) of ``crit_ratio``.

Escalations can cascade: with probability ``cascade_prob`` a new CritSit
sweeps up every other ticket the customer has open at that instant, which
reproduces multi-PMR CritSits whose swept members look unremarkable on
their own. Escalated tickets stay open longer (an escalation-handling tail
is appended), so open-CritSit live indicators have something to see.

Decision instants sit one minute past each ticket's second-to-last
pre-close event. Both classes therefore cut off at the same structural
point of their streams, and truncation depth alone carries no label
information.

Everything is driven by one ``numpy`` generator seeded from the corpus spec,
so a spec value is a complete, reproducible description of a corpus.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass

import numpy as np

from .domain import (
    CritSit,
    EventKind,
    EventRecord,
    MINUTES_PER_DAY,
    MINUTES_PER_WEEK,
    PMR,
    SupportLevel,
    received_response_samples,
)

# Opens start here: 2024-01-01T00:00Z in minutes since the epoch.
CORPUS_START_MIN = 28401120

_LEVELS = (SupportLevel.L0, SupportLevel.L1, SupportLevel.L2, SupportLevel.L3)

# Planted-driver coefficients at signal_strength = 1.
_BETA_HIST = 7.5
_BETA_LIVE = 4.0
_BETA_GAP = 2.4
_BETA_SEV = 1.5
_BETA_PHASE = 0.8
_HIST_WINDOW_MIN = 24 * MINUTES_PER_WEEK


class GenerationError(Exception):
    pass


class InfeasibleSpecError(GenerationError):
    """The spec cannot realize a single positive (n_pmrs < 1/crit_ratio)."""


@dataclass(frozen=True)
class CorpusSpec:
    seed: int
    n_customers: int = 120
    n_analysts: int = 40
    n_pmrs: int = 5000
    crit_ratio: float = 1.0 / 265.0
    cascade_prob: float = 0.25
    signal_strength: float = 0.8
    horizon_weeks: int = 104

    def __post_init__(self) -> None:
        if min(self.n_customers, self.n_analysts, self.n_pmrs, self.horizon_weeks) < 1:
            raise GenerationError("counts and horizon must be >= 1")
        if not 0.0 < self.crit_ratio < 1.0:
            raise GenerationError("crit_ratio must be in (0, 1)")
        if not 0.0 <= self.cascade_prob <= 1.0:
            raise GenerationError("cascade_prob must be in [0, 1]")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise GenerationError("signal_strength must be in [0, 1]")
        if self.n_pmrs * self.crit_ratio < 1.0:
            raise InfeasibleSpecError(
                f"n_pmrs={self.n_pmrs} cannot realize any positive at ratio {self.crit_ratio}"
            )


@dataclass
class _Skeleton:
    """One ticket before the escalation decision: its pre-crit stream."""

    pmr_id: str
    customer: int
    lead: int
    open: int
    close: int
    decision_ts: int  # one minute past the second-to-last pre-close event
    body: list[tuple[int, EventKind, int, int, int]]  # (ts, kind, sev, level, analyst or -1)
    d_gap: float
    d_sev: float


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _strictify(times: list[int]) -> list[int]:
    """Force strictly increasing integer minutes, preserving order."""
    out = []
    prev = None
    for t in times:
        t = int(t)
        if prev is not None and t <= prev:
            t = prev + 1
        out.append(t)
        prev = t
    return out


def _build_skeleton(
    i: int,
    rng: np.random.Generator,
    customer: int,
    open_min: int,
    unhappy: float,
    cust_log_delay: float,
    pool: np.ndarray,
    pool_expected: float,
    analyst_speed: np.ndarray,
) -> _Skeleton:
    lead = int(pool[rng.choice(len(pool), p=_pool_weights(len(pool)))])
    secondary = int(pool[0]) if pool[0] != lead else int(pool[-1])

    n_exchanges = 1 + int(rng.poisson(1.8))
    pmr_slowness = float(rng.normal(0.0, 0.5))

    # contact backbone: strictly ordered in/out pairs so pairing is exact
    contacts: list[tuple[float, EventKind, int]] = []
    t = float(open_min)
    for _ in range(n_exchanges):
        t += float(rng.lognormal(math.log(2500.0), 0.9))
        t_in = t
        delay = float(rng.lognormal(cust_log_delay + analyst_speed[lead] + pmr_slowness, 0.35))
        t = t_in + max(1.0, delay)
        analyst = lead if rng.random() > 0.18 else secondary
        contacts.append((t_in, EventKind.CONTACT_IN, -1))
        contacts.append((t, EventKind.CONTACT_OUT, analyst))
    last_contact = t

    span = max(60.0, last_contact - open_min)
    extras: list[tuple[float, EventKind, int]] = []
    n_sev = int(rng.poisson(0.5 + 2.4 * unhappy))
    for _ in range(n_sev):
        extras.append((open_min + rng.random() * span, EventKind.SEVERITY_CHANGE, -1))
    for _ in range(int(rng.poisson(1.1))):
        extras.append((open_min + rng.random() * span, EventKind.NOTE, -1))
    n_own = 1 + int(rng.random() < 0.8) + int(rng.random() < 0.10 + 0.45 * unhappy)
    for j in range(min(n_own, 3)):
        extras.append((open_min + (j + 1) * span / (n_own + 1.5), EventKind.OWNERSHIP_CHANGE, -1))

    merged = sorted(contacts + extras, key=lambda e: e[0])
    times = _strictify([open_min] + [int(round(e[0])) for e in merged])

    sev = int(rng.choice((4, 3, 2), p=(0.45, 0.40, 0.15)))
    level = 0
    body: list[tuple[int, EventKind, int, int, int]] = [(times[0], EventKind.OPEN, sev, level, -1)]
    d_sev = 0.0
    for ts, (orig_t, kind, analyst) in zip(times[1:], merged):
        if kind is EventKind.SEVERITY_CHANGE:
            if sev == 1:
                sev += 1
            elif sev == 4 or rng.random() < min(0.92, 0.60 + 0.25 * unhappy):
                if sev > 1 and rng.random() < 0.08:
                    sev = 1  # straight to the most severe
                else:
                    sev -= 1
                d_sev += 1.0
            else:
                sev += 1
        elif kind is EventKind.OWNERSHIP_CHANGE:
            level = min(level + 1, 3)
        body.append((ts, kind, sev, level, analyst))

    close = times[-1] + 1 + int(rng.lognormal(math.log(900.0), 0.7))
    decision_ts = times[-1] + 1 if len(times) > 1 else times[0] + 1

    current = [s for s in _body_samples(body)]
    mean_delay = sum(current) / len(current) if current else 700.0
    d_gap = math.log(max(1.0, mean_delay)) - (cust_log_delay + pool_expected)

    return _Skeleton(
        pmr_id=f"p{i:06d}",
        customer=customer,
        lead=lead,
        open=times[0],
        close=close,
        decision_ts=decision_ts,
        body=body,
        d_gap=d_gap,
        d_sev=d_sev,
    )


def _pool_weights(size: int) -> np.ndarray:
    base = np.array([0.62, 0.24, 0.14][:size])
    return base / base.sum()


def _body_samples(body: list[tuple[int, EventKind, int, int, int]]) -> list[int]:
    samples: list[int] = []
    pending: list[int] = []
    for ts, kind, _sev, _level, _analyst in body:
        if kind is EventKind.CONTACT_IN:
            pending.append(ts)
        elif kind is EventKind.CONTACT_OUT:
            samples.extend(ts - p for p in pending)
            pending.clear()
    return samples


def _decision_pass(
    base: float,
    spec: CorpusSpec,
    skeletons: list[_Skeleton],
    order: list[int],
    opens_by_customer: dict[int, list[int]],
    pmrs_of_customer: dict[int, list[int]],
    u_crit: np.ndarray,
    u_cascade: np.ndarray,
    crit_hold: np.ndarray,
    phases: list[tuple[int, int] | None],
) -> tuple[np.ndarray, list[tuple[int, int, list[int]]]]:
    """One full simulated timeline at a fixed intercept.

    Returns (crit decision time per ticket or -1, CritSit groups as
    (cause index, open ts, attached indices)).
    """
    s = spec.signal_strength
    crit_at = np.full(len(skeletons), -1, dtype=np.int64)
    # per customer: CritSit open instants (ascending) and their nominal close
    crit_opens: dict[int, list[int]] = {c: [] for c in pmrs_of_customer}
    crit_ends: dict[int, list[int]] = {c: [] for c in pmrs_of_customer}
    groups: list[tuple[int, int, list[int]]] = []

    for i in order:
        if crit_at[i] >= 0:
            continue
        sk = skeletons[i]
        t = sk.decision_ts
        copens = crit_opens[sk.customer]
        n_crit = len(copens) - bisect_right(copens, t - _HIST_WINDOW_MIN)
        popens = opens_by_customer[sk.customer]
        n_open = bisect_right(popens, t) - bisect_left(popens, t - _HIST_WINDOW_MIN + 1)
        d_hist = min(1.0, n_crit / max(1, n_open - 1))  # minus one: not this ticket
        d_live = 1.0 if any(end > t for end in crit_ends[sk.customer]) else 0.0
        phase = phases[sk.customer]
        d_phase = 1.0 if phase is not None and phase[0] <= t < phase[1] else 0.0
        z = (
            _BETA_HIST * d_hist
            + _BETA_LIVE * d_live
            + _BETA_GAP * sk.d_gap
            + _BETA_SEV * sk.d_sev
            + _BETA_PHASE * d_phase
        )
        if u_crit[i] >= _sigmoid(base + s * z):
            continue
        attached = [i]
        crit_at[i] = t
        if u_cascade[i] < spec.cascade_prob:
            for j in pmrs_of_customer[sk.customer]:
                if j != i and crit_at[j] < 0:
                    other = skeletons[j]
                    if other.open <= t < other.close:
                        crit_at[j] = t
                        attached.append(j)
        insort(copens, t)
        crit_ends[sk.customer].append(t + int(crit_hold[i]))
        groups.append((i, t, attached))
    return crit_at, groups


def _calibrate(spec: CorpusSpec, run) -> tuple[np.ndarray, list]:
    """Bisect the intercept until the realized positive count lands in band."""
    target = spec.n_pmrs * spec.crit_ratio
    lo_count = math.ceil(0.8 * target)
    hi_count = math.floor(1.2 * target)
    lo, hi = -20.0, 8.0
    best = None
    best_gap = math.inf
    for _ in range(60):
        mid = (lo + hi) / 2.0
        crit_at, groups = run(mid)
        count = int((crit_at >= 0).sum())
        if lo_count <= count <= hi_count:
            return crit_at, groups
        gap = abs(count - target)
        if gap < best_gap:
            best, best_gap = (crit_at, groups), gap
        if count < lo_count:
            lo = mid
        else:
            hi = mid
    crit_at, groups = best
    count = int((crit_at >= 0).sum())
    raise GenerationError(
        f"could not calibrate positives into [{lo_count}, {hi_count}]; closest was {count}"
    )


def _escalation_tail(
    rng: np.random.Generator, sk: _Skeleton, crit_ts: int, hold: int
) -> list[tuple[int, EventKind, int, int, int]]:
    """Post-escalation handling spread over the hold period the ticket stays open."""
    last = max(sk.body[-1][0], crit_ts)
    _ts, _k, sev, level, _a = sk.body[-1]
    n_tail = 2 + int(rng.poisson(2.0))
    offsets = sorted(int(v) for v in rng.uniform(1, max(2, hold), size=n_tail))
    tail: list[tuple[int, EventKind, int, int, int]] = []
    t = last
    for off in offsets:
        t = max(t + 1, last + off)
        r = rng.random()
        if r < 0.35:
            kind = EventKind.NOTE
            analyst = -1
        elif r < 0.70:
            kind = EventKind.CONTACT_OUT
            analyst = sk.lead
        elif r < 0.90:
            kind = EventKind.CONTACT_IN
            analyst = -1
        else:
            kind = EventKind.OWNERSHIP_CHANGE
            level = min(level + 1, 3)
            analyst = -1
        tail.append((t, kind, sev, level, analyst))
    return tail


def _to_pmr(
    sk: _Skeleton,
    tail: list[tuple[int, EventKind, int, int, int]],
    close: int,
    analyst_names: list[str],
    customer_names: list[str],
) -> PMR:
    rows = sk.body + tail
    last = rows[-1]
    rows.append((close, EventKind.CLOSE, last[2], last[3], -1))
    events = []
    for seq, (ts, kind, sev, level, analyst) in enumerate(rows, start=1):
        events.append(
            EventRecord(
                pmr_id=sk.pmr_id,
                seq=seq,
                ts=ts,
                kind=kind,
                severity_after=sev,
                level_after=_LEVELS[level],
                customer_id=customer_names[sk.customer],
                analyst_id=analyst_names[analyst] if analyst >= 0 else None,
            )
        )
    return PMR.from_events(events)


def generate(spec: CorpusSpec) -> tuple[list[PMR], list[CritSit]]:
    """Generate a corpus; identical specs yield identical corpora."""
    rng = np.random.default_rng(spec.seed)
    horizon_min = spec.horizon_weeks * MINUTES_PER_WEEK

    customer_names = [f"c{i:04d}" for i in range(spec.n_customers)]
    analyst_names = [f"a{i:03d}" for i in range(spec.n_analysts)]

    weights = rng.lognormal(0.0, 0.9, size=spec.n_customers)
    cust_prob = weights / weights.sum()
    cust_log_delay = rng.normal(math.log(240.0), 0.45, size=spec.n_customers)
    analyst_speed = rng.normal(0.0, 0.35, size=spec.n_analysts)
    pool_size = min(3, spec.n_analysts)
    pools = [rng.choice(spec.n_analysts, size=pool_size, replace=False) for _ in range(spec.n_customers)]
    pool_expected = [float(np.mean(analyst_speed[pool])) for pool in pools]

    customers = rng.choice(spec.n_customers, size=spec.n_pmrs, p=cust_prob)
    opens = CORPUS_START_MIN + rng.integers(0, horizon_min, size=spec.n_pmrs)
    unhappy = rng.beta(2.0, 6.0, size=spec.n_pmrs)

    skeletons = [
        _build_skeleton(
            i,
            rng,
            int(customers[i]),
            int(opens[i]),
            float(unhappy[i]),
            float(cust_log_delay[customers[i]]),
            pools[customers[i]],
            pool_expected[customers[i]],
            analyst_speed,
        )
        for i in range(spec.n_pmrs)
    ]

    u_crit = rng.random(spec.n_pmrs)
    u_cascade = rng.random(spec.n_pmrs)
    # how long an escalated ticket (and so its CritSit) stays open past the crit
    crit_hold = np.maximum(
        MINUTES_PER_DAY, rng.lognormal(math.log(24 * MINUTES_PER_DAY), 0.5, size=spec.n_pmrs)
    ).astype(np.int64)
    phase_coin = rng.random(spec.n_customers)
    phase_start = CORPUS_START_MIN + rng.integers(0, horizon_min, size=spec.n_customers)
    phase_len = rng.integers(8 * MINUTES_PER_WEEK, 20 * MINUTES_PER_WEEK, size=spec.n_customers)
    phases: list[tuple[int, int] | None] = [
        (int(phase_start[c]), int(phase_start[c] + phase_len[c])) if phase_coin[c] < 0.45 else None
        for c in range(spec.n_customers)
    ]

    pmrs_of_customer: dict[int, list[int]] = {}
    for i, sk in enumerate(skeletons):
        pmrs_of_customer.setdefault(sk.customer, []).append(i)
    opens_by_customer = {
        c: sorted(skeletons[i].open for i in idx) for c, idx in pmrs_of_customer.items()
    }
    order = sorted(range(spec.n_pmrs), key=lambda i: (skeletons[i].decision_ts, i))

    def run(base: float):
        return _decision_pass(
            base, spec, skeletons, order, opens_by_customer, pmrs_of_customer,
            u_crit, u_cascade, crit_hold, phases,
        )

    crit_at, groups = _calibrate(spec, run)

    closes = {i: sk.close for i, sk in enumerate(skeletons)}
    tails: dict[int, list] = {}
    for i in np.flatnonzero(crit_at >= 0):
        i = int(i)
        tail = _escalation_tail(rng, skeletons[i], int(crit_at[i]), int(crit_hold[i]))
        tails[i] = tail
        last = tail[-1][0] if tail else max(skeletons[i].body[-1][0], int(crit_at[i]))
        closes[i] = max(last + 1, int(crit_at[i] + crit_hold[i])) + int(
            rng.lognormal(math.log(600.0), 0.5)
        )

    pmrs = [
        _to_pmr(sk, tails.get(i, []), closes[i], analyst_names, customer_names)
        for i, sk in enumerate(skeletons)
    ]
    critsits = [
        CritSit(
            critsit_id=f"cs{n:05d}",
            customer_id=customer_names[skeletons[cause].customer],
            open_date=ts,
            attached_pmr_ids=frozenset(skeletons[j].pmr_id for j in attached),
        )
        for n, (cause, ts, attached) in enumerate(groups)
    ]
    return pmrs, critsits


def generate_files(spec: CorpusSpec, events_path, critsits_path) -> tuple[list[PMR], list[CritSit]]:
    """Generate and write a corpus in the standard file formats."""
    from .ingest import write_critsit_log, write_event_log

    pmrs, critsits = generate(spec)
    write_event_log(pmrs, events_path)
    write_critsit_log(critsits, critsits_path)
    return pmrs, critsits


# ---------------------------------------------------------------------------
# Corpus summary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    n_pmrs: int
    n_events: int
    n_positives: int
    n_negatives: int
    imbalance: float  # negatives per positive; inf when no positives
    n_critsits: int
    n_single: int
    n_multi: int
    multi_fraction: float
    n_customers: int
    n_analysts: int


def imbalance_ratio(n_negatives: int, n_positives: int) -> float:
    return n_negatives / n_positives if n_positives else math.inf


def corpus_stats(pmrs: list[PMR], critsits: list[CritSit]) -> CorpusStats:
    if not pmrs:
        raise GenerationError("empty corpus")
    from .domain import CritSitKind, classify_critsit

    attached = set()
    for c in critsits:
        attached.update(c.attached_pmr_ids)
    n_pos = sum(1 for p in pmrs if p.pmr_id in attached)
    n_neg = len(pmrs) - n_pos
    n_single = sum(1 for c in critsits if classify_critsit(c) is CritSitKind.SINGLE)
    n_multi = len(critsits) - n_single
    analysts = {e.analyst_id for p in pmrs for e in p.events if e.analyst_id}
    return CorpusStats(
        n_pmrs=len(pmrs),
        n_events=sum(len(p.events) for p in pmrs),
        n_positives=n_pos,
        n_negatives=n_neg,
        imbalance=imbalance_ratio(n_neg, n_pos),
        n_critsits=len(critsits),
        n_single=n_single,
        n_multi=n_multi,
        multi_fraction=n_multi / len(critsits) if critsits else 0.0,
        n_customers=len({p.customer_id for p in pmrs}),
        n_analysts=len(analysts),
    )
