import numpy as np
import pytest

from escalade.domain import EventKind, Label, PMR, label_pmr
from escalade.featurize import (
    ALL_FEATURES,
    CutoffBeforeOpenError,
    FIRST13_FEATURES,
    FINAL57_FEATURES,
    FeatureSetPreset,
    basic_attributes,
    build_matrix,
    compute_all_features,
    crit_pmr_ratio,
    entity_profile,
    featurize_pmr,
    perception_of_process,
    perception_of_time,
    preset_columns,
    read_matrix_csv,
    snapshot_series,
    write_matrix_csv,
)
from escalade.ingest import build_index

from conftest import ev, simple_pmr
from oracles import brute_force_features


DAY = 1440


class TestCatalog:
    def test_58_features_total(self):
        assert len(ALL_FEATURES) == 58
        assert len(set(ALL_FEATURES)) == 58

    def test_first13_selects_13(self):
        assert len(FIRST13_FEATURES) == 13
        assert set(FIRST13_FEATURES) <= set(ALL_FEATURES)

    def test_final57_drops_days_since_last_contact(self):
        assert len(FINAL57_FEATURES) == 57
        assert "days_since_last_contact" not in FINAL57_FEATURES
        assert "days_since_last_contact" in ALL_FEATURES

    def test_preset_columns(self):
        assert preset_columns(FeatureSetPreset.FIRST13) == FIRST13_FEATURES
        assert preset_columns(FeatureSetPreset.FINAL57) == FINAL57_FEATURES


class TestBasicAttributes:
    def test_sixteen_entries_before_cutoff(self):
        events = [ev("p1", 1, 0, "OPEN")]
        events += [ev("p1", i, i * 100, "NOTE") for i in range(2, 16)]
        events.append(ev("p1", 16, 1600, "CLOSE"))
        pmr = PMR.from_events(events)
        index = build_index([pmr], [])
        num_entries, _, _ = basic_attributes(pmr, 1600)
        assert num_entries == 16

    def test_cutoff_at_open(self):
        pmr = simple_pmr(open_ts=1000, close_ts=5000)
        assert basic_attributes(pmr, 1000) == (1, 0, 1)

    def test_days_and_level(self):
        events = [
            ev("p1", 1, 0, "OPEN", level="L0"),
            ev("p1", 2, 3 * DAY, "OWNERSHIP_CHANGE", level="L1"),
            ev("p1", 3, 9 * DAY, "OWNERSHIP_CHANGE", level="L2"),
            ev("p1", 4, 12 * DAY, "CLOSE", level="L2"),
        ]
        pmr = PMR.from_events(events)
        assert basic_attributes(pmr, 9 * DAY) == (3, 9, 2)

    def test_cutoff_before_open_raises(self):
        pmr = simple_pmr(open_ts=1000, close_ts=5000)
        with pytest.raises(CutoffBeforeOpenError):
            basic_attributes(pmr, 999)


class TestPerceptionOfProcess:
    def test_severity_path_4_3_4_1(self):
        events = [
            ev("p1", 1, 0, "OPEN", sev=4),
            ev("p1", 2, 10, "SEVERITY_CHANGE", sev=3),
            ev("p1", 3, 20, "SEVERITY_CHANGE", sev=4),
            ev("p1", 4, 30, "SEVERITY_CHANGE", sev=1),
            ev("p1", 5, 40, "CLOSE", sev=1),
        ]
        pmr = PMR.from_events(events)
        _, inc, dec, to1 = perception_of_process(pmr, 40)
        assert (inc, dec, to1) == (2, 1, 1)

    def test_no_changes(self):
        pmr = simple_pmr()
        _, inc, dec, to1 = perception_of_process(pmr, 5000)
        assert (inc, dec, to1) == (0, 0, 0)

    def test_distinct_contacts(self):
        events = [
            ev("p1", 1, 0, "OPEN"),
            ev("p1", 2, 10, "CONTACT_OUT", analyst="a1"),
            ev("p1", 3, 20, "CONTACT_OUT", analyst="a2"),
            ev("p1", 4, 30, "CONTACT_OUT", analyst="a1"),
            ev("p1", 5, 40, "CLOSE"),
        ]
        pmr = PMR.from_events(events)
        contacts, *_ = perception_of_process(pmr, 40)
        assert contacts == 2


class TestPerceptionOfTime:
    def test_single_sample(self):
        events = [
            ev("p1", 1, 0, "OPEN"),
            ev("p1", 2, 0, "CONTACT_IN"),
            ev("p1", 3, 90, "CONTACT_OUT", analyst="a1"),
            ev("p1", 4, 200, "CLOSE"),
        ]
        pmr = PMR.from_events(events)
        index = build_index([pmr], [])
        cust = entity_profile("customer", "c1", 200, None, index, "p1")
        ttfc, current, *_ = perception_of_time(pmr, 200, cust, None)
        assert ttfc == 90.0
        assert current == 90.0

    def test_diff_against_history(self):
        other = PMR.from_events(
            [
                ev("o1", 1, 0, "OPEN"),
                ev("o1", 2, 0, "CONTACT_IN"),
                ev("o1", 3, 120, "CONTACT_OUT", analyst="a1"),
                ev("o1", 4, 150, "CLOSE"),
            ]
        )
        target_events = [
            ev("p1", 1, 1000, "OPEN"),
            ev("p1", 2, 1000, "CONTACT_IN"),
            ev("p1", 3, 1090, "CONTACT_OUT", analyst="a1"),
            ev("p1", 4, 1200, "CLOSE"),
        ]
        target = PMR.from_events(target_events)
        index = build_index([other, target], [])
        cust = entity_profile("customer", "c1", 1200, None, index, "p1")
        assert cust.hist_response_min == 120.0
        _, current, diff, _, _ = perception_of_time(target, 1200, cust, None)
        assert current == 90.0
        assert diff == 30.0  # historical 120 minus current 90

    def test_missing_contact_sentinels(self):
        pmr = PMR.from_events([ev("p1", 1, 0, "OPEN"), ev("p1", 2, 100, "CLOSE")])
        index = build_index([pmr], [])
        cust = entity_profile("customer", "c1", 100, None, index, "p1")
        ttfc, current, diff, days_since, diff_hist = perception_of_time(pmr, 100, cust, None)
        assert (ttfc, current) == (-1.0, -1.0)
        assert diff == 0.0 and diff_hist == 0.0
        assert days_since == -1.0


class TestEntityProfile:
    def test_open_ratio(self):
        p1 = simple_pmr("p1", open_ts=0, close_ts=50_000)
        p2 = simple_pmr("p2", open_ts=100, close_ts=50_000)
        target = simple_pmr("p9", open_ts=200, close_ts=50_000)
        cs = {"critsit_id": "cs1", "customer_id": "c1"}
        from escalade.domain import CritSit

        critsit = CritSit("cs1", "c1", 150, frozenset({"p1"}))
        index = build_index([p1, p2, target], [critsit])
        prof = entity_profile("customer", "c1", 1000, None, index, "p9")
        assert prof.open_pmrs == 2
        assert prof.open_crits == 1
        assert prof.open_crit_pmr_ratio == 0.5

    def test_new_customer_is_all_zero(self):
        pmr = simple_pmr("p1", open_ts=0, close_ts=1000)
        index = build_index([pmr], [])
        prof = entity_profile("customer", "c1", 500, None, index, "p1")
        assert (prof.open_pmrs, prof.closed_pmrs, prof.open_crits, prof.closed_crits) == (0, 0, 0, 0)
        assert prof.hist_response_min == -1.0

    def test_ratio_edge_cases(self):
        assert crit_pmr_ratio(0, 0) == 0.0
        assert crit_pmr_ratio(2, 0) == 2.0
        assert crit_pmr_ratio(1, 2) == 0.5

    def test_rejects_unknown_window(self, small_corpus_indexed):
        pmrs, _, index, _ = small_corpus_indexed
        with pytest.raises(ValueError):
            entity_profile("customer", pmrs[0].customer_id, 0, 13, index)


class TestOracleEquivalence:
    def test_indexed_featurization_matches_brute_force(self, small_corpus_indexed):
        pmrs, critsits, index, labels = small_corpus_indexed
        rng = np.random.default_rng(99)
        picks = rng.integers(0, len(pmrs), size=120)
        for i in picks:
            pmr, label = pmrs[i], labels[i]
            # random event-aligned cutoff at or before the label cutoff
            times = [e.ts for e in pmr.events if e.ts <= label.cutoff]
            cutoff = int(times[rng.integers(0, len(times))])
            got = dict(zip(ALL_FEATURES, compute_all_features(pmr, cutoff, index)))
            want = brute_force_features(pmr, cutoff, pmrs, critsits)
            assert got == want, f"mismatch for {pmr.pmr_id} at {cutoff}"


class TestLeakageFreedom:
    def test_appending_future_events_changes_nothing(self, small_corpus_indexed):
        pmrs, critsits, index, labels = small_corpus_indexed
        pmr, label = next(
            (p, l) for p, l in zip(pmrs, labels) if len(p.events) > 6 and not l.is_crit
        )
        cutoff = pmr.events[3].ts
        before = compute_all_features(pmr, cutoff, index)

        # drop this PMR's post-cutoff events entirely and refeaturize
        truncated_events = [e for e in pmr.events if e.ts <= cutoff]
        from escalade.domain import EventRecord

        closing = EventRecord(
            pmr_id=pmr.pmr_id,
            seq=truncated_events[-1].seq + 1,
            ts=pmr.close_date,
            kind=EventKind.CLOSE,
            severity_after=truncated_events[-1].severity_after,
            level_after=truncated_events[-1].level_after,
            customer_id=pmr.customer_id,
            analyst_id=None,
        )
        mutated = PMR.from_events(truncated_events + [closing])
        others = [p for p in pmrs if p.pmr_id != pmr.pmr_id]
        index2 = build_index(others + [mutated], critsits)
        after = compute_all_features(mutated, cutoff, index2)
        assert before == after

    def test_vector_is_prefix_function(self, small_corpus_indexed):
        """Same prefix of events => same vector, regardless of what follows."""
        pmrs, critsits, index, labels = small_corpus_indexed
        rng = np.random.default_rng(5)
        for i in rng.integers(0, len(pmrs), size=40):
            pmr, label = pmrs[i], labels[i]
            v1 = compute_all_features(pmr, label.cutoff, index)
            v2 = compute_all_features(pmr, label.cutoff, index)
            assert v1 == v2


class TestWindowMonotonicity:
    def test_windowed_counts_nested(self, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed
        rng = np.random.default_rng(3)
        windowed = [
            [ALL_FEATURES.index(f"{prefix}_{base}_{w}") for w in ("12", "24", "36", "48", "inf")]
            for prefix in ("cust", "analyst")
            for base in ("open_pmrs", "closed_pmrs", "open_crits", "closed_crits")
        ]
        for i in rng.integers(0, len(pmrs), size=100):
            row = compute_all_features(pmrs[i], labels[i].cutoff, index)
            for positions in windowed:
                series = [row[p] for p in positions]
                assert series == sorted(series), (pmrs[i].pmr_id, positions, series)


class TestSelfExclusion:
    def test_own_critsit_never_counted(self, small_corpus_indexed):
        pmrs, critsits, index, labels = small_corpus_indexed
        crit_ids = {pid for c in critsits for pid in c.attached_pmr_ids}
        checked = 0
        for pmr, label in zip(pmrs, labels):
            if pmr.pmr_id not in crit_ids:
                continue
            # a lone crit customer: counts must not include the PMR's own critsit
            own = [c for c in critsits if pmr.pmr_id in c.attached_pmr_ids]
            others = [
                c for c in critsits
                if c.customer_id == pmr.customer_id and pmr.pmr_id not in c.attached_pmr_ids
            ]
            if others:
                continue
            row = dict(zip(ALL_FEATURES, compute_all_features(pmr, label.cutoff, index)))
            assert row["cust_open_crits_inf"] == 0
            assert row["cust_closed_crits_inf"] == 0
            checked += 1
        assert checked > 0


class TestFeaturizePMR:
    def test_presets_mask_columns(self, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed
        fv13 = featurize_pmr(pmrs[0], labels[0], index, FeatureSetPreset.FIRST13)
        fv57 = featurize_pmr(pmrs[0], labels[0], index, FeatureSetPreset.FINAL57)
        assert len(fv13.values) == 13
        assert len(fv57.values) == 57
        assert "days_since_last_contact" not in fv57.values
        for name, value in fv13.values.items():
            assert fv57.values[name] == value

    def test_baseline_preset_delegates(self, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed
        fv = featurize_pmr(pmrs[0], labels[0], index, FeatureSetPreset.BASELINE_RAW)
        assert fv.preset is FeatureSetPreset.BASELINE_RAW
        assert "last_seq" in fv.values


class TestSnapshotSeries:
    def test_one_er_per_snapshot(self, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed

        class FlatModel:
            def predict_proba(self, X):
                return np.full(X.shape[0], 0.25)

        pmr, label = pmrs[0], labels[0]
        series = snapshot_series(pmr, label, index, FlatModel())
        n_vis = sum(1 for e in pmr.events if e.ts <= label.cutoff)
        assert len(series) == n_vis
        assert [s for s, _ in series] == [e.seq for e in pmr.events[:n_vis]]
        assert all(0.0 <= er <= 1.0 for _, er in series)
        assert len({er for _, er in series}) == 1  # constant model, constant series


class TestSixteenSnapshots:
    def test_sixteen_entry_pmr_yields_sixteen_ers(self, small_corpus_indexed):
        _, _, index, _ = small_corpus_indexed
        events = [ev("p16", 1, 0, "OPEN")]
        events += [ev("p16", i, i * 1000, "NOTE") for i in range(2, 17)]
        events.append(ev("p16", 17, 17_000, "CLOSE"))
        pmr = PMR.from_events(events)
        solo_index = build_index([pmr], [])
        label = Label(is_crit=False, cutoff=16_000)  # OPEN plus 15 notes visible

        class FlatModel:
            def predict_proba(self, X):
                return np.linspace(0.1, 0.9, X.shape[0])

        series = snapshot_series(pmr, label, solo_index, FlatModel())
        assert len(series) == 16


class TestConcurrentFeaturization:
    def test_disjoint_pmrs_featurize_in_parallel(self, small_corpus_indexed):
        from concurrent.futures import ThreadPoolExecutor

        pmrs, _, index, labels = small_corpus_indexed
        picks = list(zip(pmrs[:60], labels[:60]))
        serial = [compute_all_features(p, l.cutoff, index) for p, l in picks]
        with ThreadPoolExecutor(max_workers=8) as pool:
            parallel = list(pool.map(lambda pl: compute_all_features(pl[0], pl[1].cutoff, index), picks))
        assert parallel == serial


class TestMatrixIO:
    def test_csv_round_trip(self, tmp_path, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed
        matrix = build_matrix(pmrs[:40], labels[:40], index, FeatureSetPreset.FINAL57)
        path = tmp_path / "m.csv"
        write_matrix_csv(matrix, path)
        again = read_matrix_csv(path)
        assert again.columns == matrix.columns
        assert again.preset is FeatureSetPreset.FINAL57
        np.testing.assert_array_equal(again.X, matrix.X)
        np.testing.assert_array_equal(again.y, matrix.y)
        assert again.pmr_ids == matrix.pmr_ids

    def test_header_contract(self, tmp_path, small_corpus_indexed):
        pmrs, _, index, labels = small_corpus_indexed
        matrix = build_matrix(pmrs[:5], labels[:5], index, FeatureSetPreset.FINAL57)
        path = tmp_path / "m.csv"
        write_matrix_csv(matrix, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "pmr_id"
        assert header[1] == "cutoff"
        assert header[-1] == "is_crit"
        assert tuple(header[2:-1]) == FINAL57_FEATURES
