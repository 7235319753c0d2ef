#!/usr/bin/env python3
"""A corpus from nothing, and what one ticket looks like to the model.

Generates a small synthetic support corpus, prints its shape, then walks
one escalated ticket: its event stream, its label cutoff, and all 58
engineered features grouped the way analysts think about them.
"""

from escalade.domain import label_pmr, minutes_to_iso
from escalade.featurize import (
    ALL_FEATURES,
    ANALYST_FEATURES,
    BASIC_FEATURES,
    CUSTOMER_FEATURES,
    PROCESS_FEATURES,
    TIME_FEATURES,
    compute_all_features,
)
from escalade.ingest import build_index
from escalade.synthgen import CorpusSpec, corpus_stats, generate

spec = CorpusSpec(
    seed=42,
    n_customers=60,
    n_analysts=20,
    n_pmrs=3000,
    crit_ratio=1 / 50,
    cascade_prob=0.25,
    signal_strength=0.9,
)
pmrs, critsits = generate(spec)
stats = corpus_stats(pmrs, critsits)

print("corpus:")
print(f"  {stats.n_pmrs} PMRs, {stats.n_events} events, {stats.n_customers} customers")
print(f"  {stats.n_positives} escalated (1:{stats.imbalance:.0f} imbalance)")
print(f"  {stats.n_critsits} CritSits, {stats.n_multi} with cascades ({stats.multi_fraction:.0%})")

index = build_index(pmrs, critsits)
labels = [label_pmr(p, critsits) for p in pmrs]

pmr, label = next((p, l) for p, l in zip(pmrs, labels) if l.is_crit)
print(f"\nticket {pmr.pmr_id} (customer {pmr.customer_id}, escalated):")
for e in pmr.events[:8]:
    analyst = f" by {e.analyst_id}" if e.analyst_id else ""
    print(f"  #{e.seq:>2} {minutes_to_iso(e.ts)}  {e.kind.value}{analyst}  sev={e.severity_after} {e.level_after.value}")
if len(pmr.events) > 8:
    print(f"  ... {len(pmr.events) - 8} more events")
print(f"label cutoff: {minutes_to_iso(label.cutoff)} (the last event before the CritSit opened)")

values = dict(zip(ALL_FEATURES, compute_all_features(pmr, label.cutoff, index)))
groups = [
    ("basic attributes", BASIC_FEATURES),
    ("customer perception of process", PROCESS_FEATURES),
    ("customer perception of time", TIME_FEATURES),
    ("customer profile", CUSTOMER_FEATURES),
    ("support analyst profile", ANALYST_FEATURES),
]
print(f"\nall {len(ALL_FEATURES)} features at the cutoff:")
for title, names in groups:
    print(f"  {title}:")
    for name in names:
        print(f"    {name:<34} {values[name]:>10.2f}")
