"""Property-based checks over the metric and labeling primitives."""

from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from escalade.domain import iso_to_minutes, minutes_to_iso
from escalade.evalharness import ConfusionMatrix, metrics, pr_sweep
from escalade.featurize import crit_pmr_ratio
from escalade.learner import split_threshold

cells = st.integers(min_value=0, max_value=10_000_000)


@given(tp=cells, tn=cells, fp=cells, fn=cells)
def test_summarization_equals_one_minus_flagged_fraction(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
    m = metrics(cm)
    exact = 1 - Fraction(tp + fp, cm.total)
    assert m.summarization == float(round(exact, 4))


@given(tp=cells, tn=cells, fp=cells, fn=cells)
def test_metric_components_stay_in_unit_interval(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    m = metrics(ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn))
    for value in (m.recall, m.precision, m.summarization):
        assert value is None or 0.0 <= value <= 1.0


@settings(max_examples=50)
@given(
    n=st.integers(min_value=2, max_value=200),
    n_pos=st.integers(min_value=1, max_value=50),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_pr_sweep_recall_monotone_and_partitioned(n, n_pos, seed):
    rng = np.random.default_rng(seed)
    n_pos = min(n_pos, n - 1)
    y = np.zeros(n, dtype=int)
    y[rng.choice(n, size=n_pos, replace=False)] = 1
    ers = rng.random(n)
    curve = pr_sweep(y, ers)
    assert (np.diff(curve.recall) <= 1e-12).all()
    assert curve.precision[0] == n_pos / n  # threshold 0 flags everything
    for t in (0.0, 0.33, 0.66, 1.0):
        cm = ConfusionMatrix.from_scores(y, ers, t)
        assert cm.total == n


@given(
    crits=st.integers(min_value=0, max_value=1000),
    pmrs=st.integers(min_value=0, max_value=1000),
)
def test_ratio_edges(crits, pmrs):
    value = crit_pmr_ratio(crits, pmrs)
    if pmrs == 0:
        assert value == float(crits)
    else:
        assert value == crits / pmrs
    assert value >= 0.0


@given(
    lo=st.floats(allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12),
    delta=st.floats(min_value=1e-12, max_value=1e12, allow_nan=False),
)
def test_split_threshold_separates_adjacent_values(lo, delta):
    hi = lo + delta
    if hi == lo:  # delta vanished in float addition
        return
    t = split_threshold(lo, hi)
    assert lo < t <= hi  # "x < t" sends lo left and hi right


@given(m=st.integers(min_value=0, max_value=2**31))
def test_timestamp_round_trip(m):
    assert iso_to_minutes(minutes_to_iso(m)) == m
