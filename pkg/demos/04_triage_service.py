#!/usr/bin/env python3
"""The live triage loop: ER, MER and CER for every open ticket.

Builds a service over a synthetic corpus frozen mid-history, recomputes
escalation risk twice a day apart, enters an analyst judgment, and shows
what the dashboard's overview and in-depth views would receive.

To run the real HTTP server instead:

    escalade synth --seed 5 --pmrs 4000 --crit-ratio 0.02 --out corpus/
    escalade featurize --events corpus/events.jsonl --critsits corpus/critsits.jsonl \
        --preset final57 --out matrix.csv
    escalade train --matrix matrix.csv --trees 60 --depth 4 --out model.json
    escalade serve --events corpus/events.jsonl --critsits corpus/critsits.jsonl \
        --model model.json --port 8008 --store triage_state.jsonl
"""

from escalade.domain import label_pmr, minutes_to_iso
from escalade.featurize import FeatureSetPreset, build_matrix
from escalade.ingest import build_index
from escalade.learner import Mode, TrainConfig, train
from escalade.synthgen import CorpusSpec, generate
from escalade.triage import TriageService

spec = CorpusSpec(
    seed=5,
    n_customers=120,
    n_analysts=30,
    n_pmrs=4000,
    crit_ratio=1 / 50,
    cascade_prob=0.2,
    signal_strength=0.9,
)
print("generating corpus and training a model ...")
pmrs, critsits = generate(spec)
index = build_index(pmrs, critsits)
labels = [label_pmr(p, critsits) for p in pmrs]
matrix = build_matrix(pmrs, labels, index, FeatureSetPreset.FINAL57)
model = train(matrix.X, matrix.y,
              TrainConfig(mode=Mode.BOOST, n_trees=40, max_depth=4, seed=5),
              matrix.columns)

service = TriageService(pmrs, critsits, model)
updated = service.recompute_all()
now = service._now
print(f"first recompute at {minutes_to_iso(now)}: {updated} open tickets scored\n")

rows = service.overview()
print("overview, ranked by ER (top 10):")
print(f"  {'ticket':<10}{'customer':<10}{'days':>5}{'ER':>5}{'MER':>5}{'CER':>5}")
for row in rows[:10]:
    mer = "-" if row["mer"] is None else row["mer"]
    print(f"  {row['pmr_id']:<10}{row['customer_id']:<10}{row['days_open']:>5}"
          f"{row['er']:>5}{mer:>5}{row['cer']:>5}")

hot = rows[0]["pmr_id"]
service.set_mer(hot, 85)
print(f"\nanalyst sets MER=85 on {hot}")

service.recompute_all(now + 1440)
print("recomputed one day later; CER now tracks the change in ER\n")

detail = service.detail(hot)
print(f"in-depth view of {hot}:")
print(f"  ER {detail['er']}  MER {detail['mer']}  CER {detail['cer']:+d}  "
      f"days open {detail['days_open']}")
print(f"  correspondence events: {len(detail['correspondence'])}")
print(f"  ER history: {[(t, er) for t, er in detail['er_history']]}")
series = detail["snapshot_series"]
print(f"  per-snapshot ER series ({len(series)} snapshots): "
      + " ".join(str(er) for _, er in series[:16]))
panel = detail["features"]
print("  feature panel extract:")
for name in ("num_entries", "days_open", "days_since_last_contact",
             "cust_open_crits_inf", "cust_open_crit_pmr_ratio"):
    print(f"    {name:<28} {panel[name]:.2f}")
