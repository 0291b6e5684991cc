"""Metrics: P/R/F1 arithmetic, span matching, mapped-entity recall."""

import pytest
from hypothesis import given, strategies as st

from picopipe.evalmetrics import (
    Counts,
    entity_counts,
    format_report,
    mapping_recall,
    normalize_surface,
    prf,
    sentence_counts,
)


class TestPrf:
    def test_hand_values(self):
        assert prf(Counts(tp=8, fp=2, fn=2)) == (0.8, 0.8, 0.8)

    def test_zero_denominators(self):
        assert prf(Counts(0, 0, 0)) == (0.0, 0.0, 0.0)
        assert prf(Counts(0, 3, 0)) == (0.0, 0.0, 0.0)

    def test_perfect(self):
        assert prf(Counts(tp=17, fp=0, fn=0)) == (1.0, 1.0, 1.0)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            Counts(tp=-1, fp=0, fn=0)

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 9))
    def test_scale_free(self, tp, fp, fn, k):
        assert prf(Counts(tp, fp, fn)) == pytest.approx(prf(Counts(tp * k, fp * k, fn * k)))

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
    def test_f1_between_p_and_r(self, tp, fp, fn):
        p, r, f1 = prf(Counts(tp, fp, fn))
        assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12


class TestEntityCounts:
    def test_identical_sets(self):
        spans = [(0, 1, 3), (1, 0, 2), (4, 2, 3)]
        c = entity_counts(spans, spans)
        assert (c.tp, c.fp, c.fn) == (3, 0, 0)

    def test_boundary_off_by_one(self):
        c = entity_counts([(0, 1, 3)], [(0, 1, 4)])
        assert (c.tp, c.fp, c.fn) == (0, 1, 1)

    def test_duplicate_prediction_one_to_one(self):
        c = entity_counts([(0, 1, 3)], [(0, 1, 3), (0, 1, 3)])
        assert (c.tp, c.fp, c.fn) == (1, 1, 0)

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4), st.integers(5, 8)), max_size=8),
           st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4), st.integers(5, 8)), max_size=8))
    def test_swapping_swaps_fp_fn(self, gold, pred):
        a = entity_counts(gold, pred)
        b = entity_counts(pred, gold)
        assert (a.tp, a.fp, a.fn) == (b.tp, b.fn, b.fp)


class TestSentenceCounts:
    def test_hand_count(self):
        c = sentence_counts(["P", "O"], ["P", "P"], "P")
        assert (c.tp, c.fp, c.fn) == (1, 1, 0)

    def test_all_correct(self):
        c = sentence_counts(["P", "O", "N"], ["P", "O", "N"], "O")
        assert (c.fp, c.fn) == (0, 0)

    def test_absent_class(self):
        c = sentence_counts(["P", "O"], ["P", "O"], "IC")
        assert (c.tp, c.fp, c.fn) == (0, 0, 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sentence_counts(["P"], ["P", "O"], "P")


class TestMappingRecall:
    def test_half_found(self):
        report = mapping_recall([("diabetes", "P"), ("stroke", "P")], [("diabetes", "P")])
        assert report["P"]["recall"] == 0.5

    def test_empty_gold_guard(self):
        report = mapping_recall([], [("x", "P")])
        assert report["P"]["recall"] == 0.0

    def test_fixture_ratio(self):
        gold = [(f"d{i}", "O") for i in range(10)]
        pred = [(f"d{i}", "O") for i in range(8)]
        assert mapping_recall(gold, pred)["O"]["recall"] == 0.8

    def test_surface_normalization(self):
        report = mapping_recall([("Breast  Cancer", "P")], [("breast cancer", "P")])
        assert report["P"]["recall"] == 1.0

    def test_label_must_match(self):
        report = mapping_recall([("stroke", "O")], [("stroke", "P")])
        assert report["O"]["recall"] == 0.0


class TestReport:
    def test_table_and_kv_block(self):
        text = format_report({"P": Counts(8, 2, 2)}, "demo")
        assert "demo" in text
        assert "precision=0.800000" in text
        assert "class=P" in text


def test_normalize_surface():
    assert normalize_surface("  Breast   Cancer ") == "breast cancer"
