"""Independent brute-force reference implementations.

Everything here recomputes results from first principles with plain loops
over the raw corpus, deliberately avoiding the index structures and the
vectorized split engine so the production paths are checked against an
implementation that shares no code with them.
"""

from __future__ import annotations

from escalade.domain import EventKind, MINUTES_PER_DAY, MINUTES_PER_WEEK

MISSING = -1.0


# ---------------------------------------------------------------------------
# Feature oracle
# ---------------------------------------------------------------------------


def _lead_full(pmr):
    counts = {}
    for e in pmr.events:
        if e.kind is EventKind.CONTACT_OUT and e.analyst_id:
            counts[e.analyst_id] = counts.get(e.analyst_id, 0) + 1
    if not counts:
        return None
    top = max(counts.values())
    return min(a for a, c in counts.items() if c == top)


def _lead_at(pmr, cutoff):
    counts = {}
    for e in pmr.events:
        if e.ts > cutoff:
            break
        if e.kind is EventKind.CONTACT_OUT and e.analyst_id:
            counts[e.analyst_id] = counts.get(e.analyst_id, 0) + 1
    if not counts:
        return None
    top = max(counts.values())
    return min(a for a, c in counts.items() if c == top)


def _full_samples(pmr):
    total = 0
    count = 0
    pending = []
    for e in pmr.events:
        if e.kind is EventKind.CONTACT_IN:
            pending.append(e.ts)
        elif e.kind is EventKind.CONTACT_OUT:
            for t in pending:
                total += e.ts - t
                count += 1
            pending = []
    return total, count


def _critsit_close(critsit, by_id):
    close = 0
    for pid in critsit.attached_pmr_ids:
        pmr = by_id.get(pid)
        if pmr is None or pmr.close_date is None:
            return None
        close = max(close, pmr.close_date)
    return close


def _in_window(value, t, window_weeks):
    if value > t:
        return False
    if window_weeks is None:
        return True
    return value > t - window_weeks * MINUTES_PER_WEEK


def brute_profile(kind, entity_id, t, window_weeks, pmrs, critsits, exclude_pmr):
    """(open_pmrs, closed_pmrs, open_crits, closed_crits, hist_sum, hist_cnt)."""
    by_id = {p.pmr_id: p for p in pmrs}

    def owned(p):
        if kind == "customer":
            return p.customer_id == entity_id
        return _lead_full(p) == entity_id

    open_p = closed_p = 0
    hist_sum = hist_cnt = 0
    for p in pmrs:
        if not owned(p) or p.pmr_id == exclude_pmr:
            continue
        close = p.close_date
        still_open = close is None or close > t
        if still_open and _in_window(p.open_date, t, window_weeks):
            open_p += 1
        if close is not None and close <= t and _in_window(close, t, window_weeks):
            closed_p += 1
        if close is not None and close <= t:
            s, c = _full_samples(p)
            hist_sum += s
            hist_cnt += c

    open_c = closed_c = 0
    for cs in critsits:
        if exclude_pmr is not None and exclude_pmr in cs.attached_pmr_ids:
            continue
        if kind == "customer":
            if cs.customer_id != entity_id:
                continue
        else:
            if not any(_lead_full(by_id[pid]) == entity_id for pid in cs.attached_pmr_ids if pid in by_id):
                continue
        close = _critsit_close(cs, by_id)
        still_open = close is None or close > t
        if still_open and _in_window(cs.open_date, t, window_weeks):
            open_c += 1
        if close is not None and close <= t and _in_window(close, t, window_weeks):
            closed_c += 1

    return open_p, closed_p, open_c, closed_c, hist_sum, hist_cnt


def _ratio(crits, pmrs):
    return crits / pmrs if pmrs > 0 else float(crits)


def brute_force_features(pmr, cutoff, pmrs, critsits):
    """All 58 features for one PMR at a cutoff, scanning raw lists only."""
    num_entries = 0
    level = pmr.events[0].level_after
    prev_sev = None
    inc = dec = to1 = 0
    out_analysts = set()
    first_out = None
    last_contact = None
    pending = []
    cur_sum = cur_cnt = 0
    for e in pmr.events:
        if e.ts > cutoff:
            break
        num_entries += 1
        level = e.level_after
        if e.kind is EventKind.SEVERITY_CHANGE and prev_sev is not None:
            if e.severity_after < prev_sev:
                inc += 1
            elif e.severity_after > prev_sev:
                dec += 1
            if prev_sev >= 2 and e.severity_after == 1:
                to1 += 1
        if e.kind is EventKind.CONTACT_OUT:
            out_analysts.add(e.analyst_id)
            if first_out is None:
                first_out = e.ts
            last_contact = e.ts
            for t in pending:
                cur_sum += e.ts - t
                cur_cnt += 1
            pending = []
        elif e.kind is EventKind.CONTACT_IN:
            pending.append(e.ts)
            last_contact = e.ts
        prev_sev = e.severity_after

    out = {
        "num_entries": float(num_entries),
        "days_open": float((cutoff - pmr.open_date) // MINUTES_PER_DAY),
        "ownership_level": float(level.ordinal),
        "num_support_contacts": float(len(out_analysts)),
        "sev_increases": float(inc),
        "sev_decreases": float(dec),
        "sev_to1_transitions": float(to1),
    }

    windows = (None, 12, 24, 36, 48)
    names = ("inf", "12", "24", "36", "48")
    lead = _lead_at(pmr, cutoff)
    for prefix, kind, entity in (("cust", "customer", pmr.customer_id), ("analyst", "analyst", lead)):
        per_window = []
        for w in windows:
            if entity is None:
                per_window.append((0, 0, 0, 0, 0, 0))
            else:
                per_window.append(
                    brute_profile(kind, entity, cutoff, w, pmrs, critsits, pmr.pmr_id)
                )
        for j, base in enumerate(("open_pmrs", "closed_pmrs", "open_crits", "closed_crits")):
            for w_name, row in zip(names, per_window):
                out[f"{prefix}_{base}_{w_name}"] = float(row[j])
        inf = per_window[0]
        out[f"{prefix}_open_crit_pmr_ratio"] = _ratio(inf[2], inf[0])
        out[f"{prefix}_closed_crit_pmr_ratio"] = _ratio(inf[3], inf[1])
        hist = inf[4] / inf[5] if inf[5] else MISSING
        if prefix == "cust":
            out["cust_hist_recv_resp_min"] = hist
        else:
            out["analyst_hist_sent_resp_min"] = hist

    cust_hist = out["cust_hist_recv_resp_min"]
    analyst_hist = out["analyst_hist_sent_resp_min"]
    current = cur_sum / cur_cnt if cur_cnt else MISSING
    out["time_to_first_contact_min"] = (
        float(first_out - pmr.open_date) if first_out is not None else MISSING
    )
    out["current_recv_resp_min"] = current
    out["diff_current_vs_hist_recv_min"] = (
        cust_hist - current if current != MISSING and cust_hist != MISSING else 0.0
    )
    out["days_since_last_contact"] = (
        float((cutoff - last_contact) // MINUTES_PER_DAY) if last_contact is not None else MISSING
    )
    out["diff_hist_sent_vs_hist_recv_min"] = (
        cust_hist - analyst_hist if cust_hist != MISSING and analyst_hist != MISSING else 0.0
    )
    return out


# ---------------------------------------------------------------------------
# Split-search oracle
# ---------------------------------------------------------------------------


def _midpoint(lo, hi):
    t = (lo + hi) / 2.0
    return hi if t <= lo else t


def exhaustive_best_split_xgb(X, g, h, lam):
    """Best (gain, feature, threshold) by enumerating every boundary, plain loops.

    Sorted by (value, row index) per feature with running left sums, so the
    float arithmetic proceeds in the same order the production scan uses;
    tie-breaks are strict-greater, keeping the lowest feature then lowest
    threshold.
    """
    n, d = X.shape
    best_gain = 0.0
    best = None
    for f in range(d):
        order = sorted(range(n), key=lambda i: (X[i, f], i))
        gt = 0.0
        ht = 0.0
        for i in order:
            gt += g[i]
            ht += h[i]
        gl = 0.0
        hl = 0.0
        for pos in range(n - 1):
            i = order[pos]
            gl += g[i]
            hl += h[i]
            lo, hi = X[i, f], X[order[pos + 1], f]
            if lo == hi:
                continue
            gr = gt - gl
            hr = ht - hl
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - gt * gt / (ht + lam))
            if gain > best_gain:
                best_gain = gain
                best = (gain, f, _midpoint(lo, hi))
    return best


def exhaustive_best_split_gini(X, y):
    """Best (gain, feature, threshold) for the count-space gini criterion."""
    n, d = X.shape
    best_gain = 0.0
    best = None
    for f in range(d):
        order = sorted(range(n), key=lambda i: (X[i, f], i))
        pt = 0.0
        for i in order:
            pt += y[i]
        nt = float(n)
        pl = 0.0
        nl = 0.0
        for pos in range(n - 1):
            i = order[pos]
            pl += y[i]
            nl += 1.0
            lo, hi = X[i, f], X[order[pos + 1], f]
            if lo == hi:
                continue
            pr = pt - pl
            nr = nt - nl
            gain = 2.0 * (pt * (nt - pt) / nt - pl * (nl - pl) / nl - pr * (nr - pr) / nr)
            if gain > best_gain:
                best_gain = gain
                best = (gain, f, _midpoint(lo, hi))
    return best
