import pytest

from escalade.domain import (
    CritSit,
    EventKind,
    EventRecord,
    PMR,
    SupportLevel,
    label_pmr,
)
from escalade.ingest import build_index
from escalade.synthgen import CorpusSpec, generate


def ev(pmr_id, seq, ts, kind, sev=3, level="L1", customer="c1", analyst=None):
    return EventRecord(
        pmr_id=pmr_id,
        seq=seq,
        ts=ts,
        kind=EventKind(kind),
        severity_after=sev,
        level_after=SupportLevel(level),
        customer_id=customer,
        analyst_id=analyst,
    )


def simple_pmr(pmr_id="p1", customer="c1", open_ts=1000, close_ts=5000, analyst="a1"):
    """OPEN -> CONTACT_IN -> CONTACT_OUT -> CLOSE with evenly spread times."""
    third = (close_ts - open_ts) // 3
    return PMR.from_events(
        [
            ev(pmr_id, 1, open_ts, "OPEN", customer=customer),
            ev(pmr_id, 2, open_ts + third, "CONTACT_IN", customer=customer),
            ev(pmr_id, 3, open_ts + 2 * third, "CONTACT_OUT", customer=customer, analyst=analyst),
            ev(pmr_id, 4, close_ts, "CLOSE", customer=customer),
        ]
    )


@pytest.fixture(scope="session")
def small_corpus():
    """A seeded 2,000-PMR corpus with decent escalation signal."""
    spec = CorpusSpec(
        seed=20240301,
        n_customers=50,
        n_analysts=18,
        n_pmrs=2000,
        crit_ratio=1 / 40,
        cascade_prob=0.3,
        signal_strength=0.9,
        horizon_weeks=104,
    )
    pmrs, critsits = generate(spec)
    return pmrs, critsits


@pytest.fixture(scope="session")
def small_corpus_indexed(small_corpus):
    pmrs, critsits = small_corpus
    index = build_index(pmrs, critsits)
    labels = [label_pmr(p, critsits) for p in pmrs]
    return pmrs, critsits, index, labels
