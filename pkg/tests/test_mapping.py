"""Entity-to-P/O mapping: rule matching, score fusion, intersection
resolution, document-level flow with fallback."""

import numpy as np
import pytest

from picopipe import fixtures, mapping, pico
from picopipe.corpus import make_document
from picopipe.dner import EntitySpan
from picopipe.mapping import (
    LinguisticRule,
    MappingConfig,
    RulePatternError,
    builtin_rules,
    compile_rule_pattern,
    load_rules,
    map_document,
    resolve_intersections,
    rule_apply,
    save_rules,
    score_entity,
)

PROBS = {
    # (P, IC, O, N)
    "p_heavy": np.array([0.6, 0.05, 0.4 - 0.05, 0.0]),
    "even": np.array([0.25, 0.25, 0.25, 0.25]),
}


def span_for(tokens, start, end, probs=None):
    return EntitySpan(0, start, end, " ".join(tokens[start:end]),
                      pico_probs=probs if probs is not None else np.array([0.6, 0.0, 0.4, 0.0]))


class TestRulePatterns:
    def test_exactly_one_marker_required(self):
        with pytest.raises(RulePatternError):
            compile_rule_pattern("no marker at all")
        with pytest.raises(RulePatternError):
            compile_rule_pattern("risk of <outcome> and <population>")
        compile_rule_pattern("risk of <outcome>")

    def test_invalid_target(self):
        with pytest.raises(RulePatternError):
            LinguisticRule(id="x", target="N", pattern="risk of <outcome>")

    def test_registration_time_validation_only(self):
        # apply never raises for pattern reasons once rules are built
        rule = LinguisticRule(id="x", target="O", pattern="risk of <outcome>")
        tokens = "increased risk of stroke".split()
        rule_apply([rule], tokens, span_for(tokens, 3, 4))


class TestRuleApply:
    def test_risk_of_outcome(self):
        rule = LinguisticRule(id="r1", target="O", pattern="risk of <outcome>")
        tokens = "increased risk of stroke".split()
        vec, rid = rule_apply([rule], tokens, span_for(tokens, 3, 4))
        assert vec == (0, 1)
        assert rid == "r1"

    def test_no_rules(self):
        tokens = "increased risk of stroke".split()
        assert rule_apply([], tokens, span_for(tokens, 3, 4)) == ((0, 0), None)

    def test_span_outside_window(self):
        rule = LinguisticRule(id="r1", target="O", pattern="risk of <outcome>")
        tokens = "stroke increases risk of death".split()
        vec, rid = rule_apply([rule], tokens, span_for(tokens, 0, 1))
        assert vec == (0, 0)

    def test_disabled_rule_ignored(self):
        rule = LinguisticRule(id="r1", target="O", pattern="risk of <outcome>", enabled=False)
        tokens = "risk of stroke".split()
        assert rule_apply([rule], tokens, span_for(tokens, 2, 3))[0] == (0, 0)

    def test_population_rule(self):
        rule = LinguisticRule(id="p1", target="P", pattern="patients with <population>")
        tokens = "patients with type 2 diabetes were enrolled".split()
        vec, _ = rule_apply([rule], tokens, span_for(tokens, 2, 5))
        assert vec == (1, 0)

    def test_longest_pattern_wins_conflict(self):
        short = LinguisticRule(id="o1", target="O", pattern="of <outcome>")
        longer = LinguisticRule(id="p1", target="P", pattern="cohort study of <population>")
        tokens = "cohort study of diabetes".split()
        vec, rid = rule_apply([short, longer], tokens, span_for(tokens, 3, 4))
        assert vec == (1, 0)
        assert rid == "p1"

    def test_equal_length_conflict_cancels(self):
        a = LinguisticRule(id="o1", target="O", pattern="risk of <outcome>")
        b = LinguisticRule(id="p1", target="P", pattern="risk of <population>")
        tokens = "risk of stroke".split()
        assert rule_apply([a, b], tokens, span_for(tokens, 2, 3)) == ((0, 0), None)

    def test_case_insensitive(self):
        rule = LinguisticRule(id="r1", target="O", pattern="Risk of <outcome>")
        tokens = "RISK OF STROKE".split()
        assert rule_apply([rule], tokens, span_for(tokens, 2, 3))[0] == (0, 1)

    def test_exact_surface_marker(self):
        rule = LinguisticRule(id="a1", target="O", pattern="<outcome:hospitalization>")
        tokens = "frequent hospitalization events".split()
        assert rule_apply([rule], tokens, span_for(tokens, 1, 2))[0] == (0, 1)
        assert rule_apply([rule], tokens, span_for(tokens, 2, 3))[0] == (0, 0)

    def test_span_bounds_validated(self):
        rule = LinguisticRule(id="r1", target="O", pattern="risk of <outcome>")
        tokens = "risk of stroke".split()
        with pytest.raises(ValueError):
            rule_apply([rule], tokens, EntitySpan(0, 2, 9, "x"))


class TestScoreFusion:
    def test_balanced_weight_with_o_rule(self):
        span = span_for("risk of stroke".split(), 2, 3, np.array([0.6, 0.0, 0.4, 0.0]))
        ent = score_entity(span, (0, 1), MappingConfig(lam=0.5))
        np.testing.assert_allclose([ent.score_p, ent.score_o], [0.30, 0.70], atol=1e-12)
        assert ent.final_label == "O"

    def test_classifier_only_reduction(self):
        span = span_for("plain mention of stroke".split(), 3, 4, np.array([0.6, 0.0, 0.4, 0.0]))
        ent = score_entity(span, (0, 1), MappingConfig(lam=1.0))
        assert ent.final_label == "P"

    def test_rule_only_reduction(self):
        span = span_for("x".split(), 0, 1, np.array([0.0, 0.0, 1.0, 0.0]))
        ent = score_entity(span, (1, 0), MappingConfig(lam=0.0))
        assert ent.final_label == "P"
        np.testing.assert_allclose([ent.score_p, ent.score_o], [1.0, 0.0], atol=1e-12)

    def test_tie_prefers_p(self):
        span = span_for("x".split(), 0, 1, np.array([0.5, 0.0, 0.5, 0.0]))
        ent = score_entity(span, (0, 0), MappingConfig(lam=1.0))
        assert ent.final_label == "P"

    def test_score_sum_identity(self):
        # with g=(0,0): score_p + score_o = lam*(s1+s2) exactly
        for lam in (0.0, 0.3, 0.5, 0.9, 1.0):
            span = span_for("x".split(), 0, 1, np.array([0.37, 0.1, 0.23, 0.3]))
            ent = score_entity(span, (0, 0), MappingConfig(lam=lam))
            np.testing.assert_allclose(ent.score_p + ent.score_o, lam * (0.37 + 0.23), atol=1e-12)

    def test_crossing_point(self):
        # s=(0.6, 0.4), g=(0,1): label flips from O to P at lam = 1/(1+s1-s2)
        probs = np.array([0.6, 0.0, 0.4, 0.0])
        lam_star = 1.0 / 1.2
        eps = 1e-9
        below = score_entity(span_for(["x"], 0, 1, probs), (0, 1), MappingConfig(lam=lam_star - 1e-6))
        above = score_entity(span_for(["x"], 0, 1, probs), (0, 1), MappingConfig(lam=lam_star + 1e-6))
        assert below.final_label == "O"
        assert above.final_label == "P"
        np.testing.assert_allclose(lam_star, 0.8333333333333333, atol=eps)
        at = score_entity(span_for(["x"], 0, 1, probs), (0, 1), MappingConfig(lam=lam_star))
        np.testing.assert_allclose(at.score_p, at.score_o, atol=1e-12)

    def test_missing_probabilities_rejected(self):
        span = EntitySpan(0, 0, 1, "x", pico_probs=None)
        with pytest.raises(ValueError):
            score_entity(span, (0, 0), MappingConfig())

    def test_renormalize_flag(self):
        span = span_for(["x"], 0, 1, np.array([0.3, 0.3, 0.2, 0.2]))
        raw = score_entity(span, (0, 0), MappingConfig(lam=1.0))
        renorm = score_entity(span, (0, 0), MappingConfig(lam=1.0, renormalize=True))
        np.testing.assert_allclose(raw.s1 + raw.s2, 0.5, atol=1e-12)
        np.testing.assert_allclose(renorm.s1 + renorm.s2, 1.0, atol=1e-12)

    def test_lambda_range_validated(self):
        with pytest.raises(ValueError):
            MappingConfig(lam=1.5)


def mk_mapped(surface, label, score, idx=0):
    span = EntitySpan(idx, 0, len(surface.split()), surface,
                      pico_probs=np.array([0.5, 0.0, 0.5, 0.0]))
    ent = score_entity(span, (0, 0), MappingConfig(lam=1.0))
    ent.final_label = label
    if label == "P":
        ent.score_p = score
    else:
        ent.score_o = score
    return ent


class TestResolveIntersections:
    def test_keep_higher_winning_score(self):
        ents = [mk_mapped("diabetes", "P", 0.7), mk_mapped("diabetes", "O", 0.55, idx=1)]
        out = resolve_intersections(ents)
        assert len(out) == 1
        assert out[0].final_label == "P"

    def test_disjoint_surfaces_unchanged(self):
        ents = [mk_mapped("diabetes", "P", 0.7), mk_mapped("stroke", "O", 0.9, idx=1)]
        assert resolve_intersections(ents) == ents

    def test_exact_tie_keeps_p(self):
        ents = [mk_mapped("diabetes", "O", 0.5), mk_mapped("diabetes", "P", 0.5, idx=1)]
        out = resolve_intersections(ents)
        assert len(out) == 1
        assert out[0].final_label == "P"

    def test_same_label_duplicates_untouched(self):
        ents = [mk_mapped("stroke", "O", 0.6), mk_mapped("stroke", "O", 0.8, idx=1)]
        assert len(resolve_intersections(ents)) == 2

    def test_idempotent(self):
        ents = [mk_mapped("diabetes", "P", 0.7), mk_mapped("diabetes", "O", 0.55, idx=1),
                mk_mapped("stroke", "O", 0.9, idx=2)]
        once = resolve_intersections(ents)
        assert resolve_intersections(once) == once

    def test_normalized_surface_matching(self):
        ents = [mk_mapped("Breast  Cancer", "P", 0.7), mk_mapped("breast cancer", "O", 0.9, idx=1)]
        out = resolve_intersections(ents)
        assert len(out) == 1
        assert out[0].final_label == "O"


class TestMapDocument:
    def test_fixture_document(self, tiny_pico_model, tiny_dner_model):
        doc = make_document("d", *fixtures.fixture_paper())
        pico.classify_document(tiny_pico_model, doc)
        p_ents, o_ents = map_document(doc, tiny_dner_model, builtin_rules(), MappingConfig())
        assert all(e.final_label == "P" for e in p_ents)
        assert all(e.final_label == "O" for e in o_ents)
        surfaces_o = {e.surface for e in o_ents}
        assert "stroke" in surfaces_o  # "risk of <outcome>" family fires

    def test_fallback_to_ic_n_sentences(self, tiny_pico_model, tiny_dner_model):
        doc = make_document("d", "", "Participants developed stroke during follow-up.")
        pico.classify_document(tiny_pico_model, doc)
        doc.sentences[0].pico_label = "N"  # force out of the default scope
        doc.sentences[0].pico_probs = np.array([0.2, 0.1, 0.3, 0.4])
        p_ents, o_ents = map_document(doc, tiny_dner_model, [], MappingConfig(lam=0.5))
        found = p_ents + o_ents
        assert any(e.surface == "stroke" for e in found)
        # scored with that sentence's own probabilities: s2 > s1 -> O
        ent = next(e for e in found if e.surface == "stroke")
        assert ent.final_label == "O"
        assert (ent.s1, ent.s2) == (0.2, 0.3)

    def test_fallback_disabled(self, tiny_pico_model, tiny_dner_model):
        doc = make_document("d", "", "Participants developed stroke during follow-up.")
        pico.classify_document(tiny_pico_model, doc)
        doc.sentences[0].pico_label = "N"
        p_ents, o_ents = map_document(doc, tiny_dner_model, [],
                                      MappingConfig(fallback=False))
        assert (p_ents, o_ents) == ([], [])

    def test_empty_document_both_passes(self, tiny_pico_model, tiny_dner_model):
        doc = make_document("d", "Nothing medical here today.", "")
        pico.classify_document(tiny_pico_model, doc)
        doc.sentences[0].pico_label = "N"
        p_ents, o_ents = map_document(doc, tiny_dner_model, builtin_rules(), MappingConfig())
        assert p_ents == [] and o_ents == []

    def test_labels_restricted_to_p_o(self, tiny_pico_model, tiny_dner_model):
        doc = make_document("d", *fixtures.fixture_paper())
        pico.classify_document(tiny_pico_model, doc)
        p_ents, o_ents = map_document(doc, tiny_dner_model, builtin_rules(), MappingConfig())
        assert {e.final_label for e in p_ents + o_ents} <= {"P", "O"}


class TestRuleFiles:
    def test_round_trip(self, tmp_path):
        rules = [LinguisticRule(id="r1", target="O", pattern="risk of <outcome>"),
                 LinguisticRule(id="r2", target="P", pattern="patients with <population>")]
        path = str(tmp_path / "rules.tsv")
        save_rules(path, rules)
        loaded = load_rules(path)
        assert [(r.target, r.pattern) for r in loaded] == [(r.target, r.pattern) for r in rules]

    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text("O\trisk of <outcome>\nbroken\n")
        with pytest.raises(ValueError, match=":2:"):
            load_rules(str(path))

    def test_builtin_rules_compile_and_cover_both_targets(self):
        rules = builtin_rules()
        assert len(rules) >= 10
        assert {r.target for r in rules} == {"P", "O"}
        assert all(r.origin == "builtin" for r in rules)
