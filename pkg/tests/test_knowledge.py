import pytest

from flowtriage.flows import ClassLabel
from flowtriage.knowledge import (
    KnowledgeBase,
    KnowledgeBaseError,
    RemediationEntry,
    UnknownRecommendationError,
    apply_rating,
    default_knowledge_base,
    load_knowledge_base,
    save_knowledge_base,
    suggest,
    suggestion_score,
)
from flowtriage.nnet import ClassDistribution


def dist_for(label: ClassLabel) -> ClassDistribution:
    probs = [0.0, 0.0, 0.0]
    probs[label.index] = 1.0
    return ClassDistribution(tuple(probs), label)


class TestSuggest:
    def test_dos_prediction_ranks_dos_measures_first(self):
        kb = default_knowledge_base()
        ranked = suggest(dist_for(ClassLabel.DOS_ATTACK), kb, top_n=5)
        ids = [entry.recommendation_id for entry, _ in ranked]
        assert ids[0] == "dos-blacklist-sources"
        assert "dos-notify-provider" in ids[:3]

    def test_incident_prediction_includes_server_reboot(self):
        kb = default_knowledge_base()
        ranked = suggest(dist_for(ClassLabel.SERVICE_INCIDENT), kb, top_n=5)
        ids = [entry.recommendation_id for entry, _ in ranked]
        assert "svc-reboot-server" in ids
        assert ids[0] == "svc-restart-service"

    def test_feedback_score_ratio(self):
        shared = dict(
            title="t", detail="d", level="software",
            applicable_classes=frozenset({ClassLabel.DOS_ATTACK}), base_rank=0.5,
        )
        kb = KnowledgeBase((
            RemediationEntry("a-neutral", feedback_score=3.0, **shared),
            RemediationEntry("b-boosted", feedback_score=5.0, **shared),
            RemediationEntry("z-other", title="t", detail="d", level="software",
                             applicable_classes=frozenset(set(ClassLabel)), base_rank=0.1),
        ))
        ranked = suggest(dist_for(ClassLabel.DOS_ATTACK), kb, top_n=3)
        assert ranked[0][0].recommendation_id == "b-boosted"
        assert ranked[0][1] == pytest.approx(ranked[1][1] * 5 / 3, rel=1e-12)

    def test_every_class_gets_suggestions_from_default_kb(self):
        kb = default_knowledge_base()
        for label in ClassLabel:
            ranked = suggest(dist_for(label), kb, top_n=3)
            assert ranked, label
            assert all(score > 0 for _, score in ranked)

    def test_order_insensitive_to_entry_permutation(self):
        kb = default_knowledge_base()
        reversed_kb = KnowledgeBase(tuple(reversed(kb.entries)), kb.version)
        dist = ClassDistribution((0.2, 0.5, 0.3), ClassLabel.SERVICE_INCIDENT)
        a = [(e.recommendation_id, s) for e, s in suggest(dist, kb, top_n=10)]
        b = [(e.recommendation_id, s) for e, s in suggest(dist, reversed_kb, top_n=10)]
        assert a == b

    def test_ties_break_by_id(self):
        shared = dict(
            title="t", detail="d", level="software",
            applicable_classes=frozenset({ClassLabel.DOS_ATTACK}), base_rank=0.5,
        )
        kb = KnowledgeBase((
            RemediationEntry("zz-entry", **shared),
            RemediationEntry("aa-entry", **shared),
            RemediationEntry("cover-all", title="t", detail="d", level="software",
                             applicable_classes=frozenset(set(ClassLabel)),
                             base_rank=0.01),
        ))
        ranked = suggest(dist_for(ClassLabel.DOS_ATTACK), kb, top_n=2)
        assert [e.recommendation_id for e, _ in ranked] == ["aa-entry", "zz-entry"]

    def test_top_n_limits_results(self):
        kb = default_knowledge_base()
        assert len(suggest(dist_for(ClassLabel.DOS_ATTACK), kb, top_n=2)) == 2

    def test_empty_kb_rejected(self):
        empty = KnowledgeBase(())
        with pytest.raises(KnowledgeBaseError):
            suggest(dist_for(ClassLabel.DOS_ATTACK), empty, top_n=3)

    def test_raising_feedback_never_lowers_position(self):
        kb = default_knowledge_base()
        dist = ClassDistribution((0.1, 0.3, 0.6), ClassLabel.DOS_ATTACK)
        target = "dos-rate-limit"
        before = [e.recommendation_id for e, _ in suggest(dist, kb, top_n=20)]
        boosted = apply_rating(apply_rating(kb, target, 5), target, 5)
        after = [e.recommendation_id for e, _ in suggest(dist, boosted, top_n=20)]
        assert after.index(target) <= before.index(target)


class TestApplyRating:
    def test_fresh_entry_rated_five_becomes_four(self):
        kb = default_knowledge_base()
        updated = apply_rating(kb, "svc-reboot-server", 5)
        assert updated.get("svc-reboot-server").feedback_score == pytest.approx(4.0)

    def test_two_ratings_one_and_five_back_to_three(self):
        kb = default_knowledge_base()
        kb = apply_rating(kb, "svc-reboot-server", 1)
        kb = apply_rating(kb, "svc-reboot-server", 5)
        assert kb.get("svc-reboot-server").feedback_score == pytest.approx(3.0)

    def test_unknown_recommendation_rejected(self):
        with pytest.raises(UnknownRecommendationError):
            apply_rating(default_knowledge_base(), "nope", 5)

    def test_original_kb_not_mutated(self):
        kb = default_knowledge_base()
        apply_rating(kb, "svc-reboot-server", 5)
        assert kb.get("svc-reboot-server").feedback_score == 3.0

    def test_score_validated(self):
        with pytest.raises(ValueError):
            apply_rating(default_knowledge_base(), "svc-reboot-server", 9)


class TestKnowledgeBaseInvariants:
    def test_default_kb_covers_every_class_with_three_entries(self):
        kb = default_knowledge_base()
        for label in ClassLabel:
            count = sum(1 for e in kb.entries if label in e.applicable_classes)
            assert count >= 3, label

    def test_duplicate_ids_rejected(self):
        entry = default_knowledge_base().entries[0]
        with pytest.raises(KnowledgeBaseError):
            KnowledgeBase((entry, entry))

    def test_uncovered_class_rejected(self):
        entry = RemediationEntry(
            "only-dos", "t", "d", "software", frozenset({ClassLabel.DOS_ATTACK}))
        with pytest.raises(KnowledgeBaseError):
            KnowledgeBase((entry,))

    def test_persistence_round_trip(self, tmp_path):
        kb = apply_rating(default_knowledge_base(), "dos-rate-limit", 4)
        path = tmp_path / "kb.json"
        save_knowledge_base(kb, path)
        assert load_knowledge_base(path) == kb


class TestSuggestionScore:
    def test_multiplicative_form(self):
        entry = RemediationEntry(
            "x", "t", "d", "software",
            frozenset({ClassLabel.SERVICE_INCIDENT, ClassLabel.DOS_ATTACK}),
            base_rank=0.8, feedback_score=4.5,
        )
        dist = ClassDistribution((0.1, 0.3, 0.6), ClassLabel.DOS_ATTACK)
        expected = (0.3 + 0.6) * 0.8 * (4.5 / 3)
        assert suggestion_score(entry, dist) == pytest.approx(expected, rel=1e-12)
