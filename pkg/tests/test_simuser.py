import numpy as np
import pytest

from xtom.bubble import DialogHistory, Discourse
from xtom.errors import Exhausted, SchemaError
from xtom.simuser import (
    Curiosity,
    Task,
    UserProfile,
    attempt_task,
    build_catalog,
    format_profile,
    next_question,
    parse_profile,
    rate_satisfaction,
)

from .conftest import chain_grammar, full_pg
from .test_bubble import bubble_at


@pytest.fixture(scope="module")
def action_task(grammar):
    return Task(
        id="action",
        kind="action_id",
        labels=("walking", "running"),
        critical_nodes=("person", "lower-body", "upper-body"),
        answer_source=("person", "action"),
    )


class TestCatalog:
    def test_single_node_grammar(self):
        g = chain_grammar(1)
        task = Task(id="t", kind="body_part_id", labels=("x",), critical_nodes=("n0",))
        cat = build_catalog(g, task)
        assert len(cat.questions) == 1

    def test_fixture_counts(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        assert len(cat.questions) == 11
        assert sorted(cat.subjects()) == sorted(grammar.nodes)

    def test_critical_subjects_lead(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        lead = [q.subject for q in cat.questions[:3]]
        assert sorted(lead) == sorted(action_task.critical_nodes)
        assert all(q.critical for q in cat.questions[:3])

    def test_two_tasks_same_content_different_order(self, grammar, action_task):
        other = Task(
            id="pose",
            kind="pose_estimation",
            labels=("upright", "bent"),
            critical_nodes=("head", "torso"),
        )
        a = build_catalog(grammar, action_task)
        b = build_catalog(grammar, other)
        assert sorted(q.subject for q in a.questions) == sorted(q.subject for q in b.questions)
        assert [q.subject for q in a.questions] != [q.subject for q in b.questions]


class TestNextQuestion:
    def test_breadth_starts_at_rootmost_critical(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        profile = UserProfile(curiosity=Curiosity.BREADTH)
        qid = next_question(profile, cat, set(), DialogHistory(), np.random.default_rng(0))
        assert qid == "q-person"

    def test_exhausted(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        profile = UserProfile()
        with pytest.raises(Exhausted):
            next_question(profile, cat, set(grammar.nodes), DialogHistory(), np.random.default_rng(0))

    def test_never_repeats_revealed_subject(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        profile = UserProfile()
        revealed = {"person"}
        qid = next_question(profile, cat, revealed, DialogHistory(), np.random.default_rng(0))
        assert qid != "q-person"

    def test_random_matches_rng_replay(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        profile = UserProfile(curiosity=Curiosity.RANDOM, seed=3)
        revealed = {"head"}
        got = next_question(profile, cat, revealed, DialogHistory(), np.random.default_rng(3))
        open_qs = [q for q in cat.questions if q.subject not in revealed]
        expected = open_qs[int(np.random.default_rng(3).integers(len(open_qs)))].id
        assert got == expected

    def test_depth_descends_from_last_attention(self, grammar, action_task):
        cat = build_catalog(grammar, action_task)
        profile = UserProfile(curiosity=Curiosity.DEPTH)
        history = DialogHistory(bubbles=[bubble_at("upper-body")])
        qid = next_question(profile, cat, {"upper-body"}, history, np.random.default_rng(0))
        subject = cat.by_id(qid).subject
        assert subject in grammar.descendants("upper-body")


class TestAttempt:
    def test_full_evidence_full_confidence(self, grammar, action_task):
        pg = full_pg(grammar)
        pg = pg.__class__.build(
            grammar, pg.node_ids, None, {"person": {"action": "running"}}, pg.detections
        )
        profile = UserProfile(accuracy_given_evidence=1.0)
        revealed = set(action_task.critical_nodes)
        answer, cf = attempt_task(profile, action_task, revealed, pg, np.random.default_rng(0))
        assert answer == "running"
        assert cf == 5

    def test_half_revealed_cf(self, grammar):
        task = Task(
            id="t",
            kind="action_id",
            labels=("walking", "running"),
            critical_nodes=("person", "upper-body", "lower-body", "head"),
            answer_source=("person", "action"),
        )
        pg = full_pg(grammar)
        pg = pg.__class__.build(
            grammar, pg.node_ids, None, {"person": {"action": "walking"}}, pg.detections
        )
        profile = UserProfile(accuracy_given_evidence=1.0, evidence_threshold=0.5)
        answer, cf = attempt_task(
            profile, task, {"person", "upper-body"}, pg, np.random.default_rng(0)
        )
        assert cf == 3

    def test_blind_guess_is_uniform(self, grammar, action_task):
        pg = full_pg(grammar)
        profile = UserProfile()
        rng = np.random.default_rng(123)
        hits = 0
        n = 10_000
        for _ in range(n):
            answer, cf = attempt_task(profile, action_task, set(), pg, rng)
            assert cf in (1, 2)
            hits += answer == "walking"
        assert abs(hits / n - 0.5) < 0.015

    def test_higher_threshold_never_helps(self, grammar, action_task):
        """Monte Carlo over 10k attempts: raising the evidence threshold
        makes the user strictly harder to please at a fixed reveal state."""
        pg = full_pg(grammar)
        pg = pg.__class__.build(
            grammar, pg.node_ids, None, {"person": {"action": "walking"}}, pg.detections
        )
        critical = list(action_task.critical_nodes)
        success = {}
        for threshold in (0.3, 0.9):
            profile = UserProfile(evidence_threshold=threshold, accuracy_given_evidence=0.9)
            rng = np.random.default_rng(2026)  # common random numbers across thresholds
            hits = 0
            for _ in range(10_000):
                k = int(rng.integers(0, len(critical) + 1))
                revealed = set(critical[:k])
                answer, _cf = attempt_task(profile, action_task, revealed, pg, rng)
                hits += answer == "walking"
            success[threshold] = hits / 10_000
        assert success[0.9] <= success[0.3]


class TestSatisfaction:
    def test_all_critical_no_repeats(self, action_task):
        h = DialogHistory(bubbles=[bubble_at("person"), bubble_at("lower-body", s2=9.0)])
        assert rate_satisfaction(h, action_task) == 5

    def test_all_off_task(self, action_task):
        h = DialogHistory(bubbles=[bubble_at("head"), bubble_at("torso", s1=3.15)])
        assert rate_satisfaction(h, action_task) == 1

    def test_half_critical_no_repeats(self, action_task):
        h = DialogHistory(bubbles=[bubble_at("person"), bubble_at("head")])
        assert rate_satisfaction(h, action_task) == 3

    def test_repeats_discount(self, action_task):
        h = DialogHistory(
            bubbles=[
                bubble_at("person"),
                bubble_at("person", discourse=Discourse.RECURRENCE),
            ]
        )
        assert rate_satisfaction(h, action_task) == 3


class TestProfileFiles:
    def test_round_trip(self):
        profile = UserProfile(
            curiosity=Curiosity.DEPTH,
            evidence_threshold=0.4,
            accuracy_given_evidence=0.75,
            patience=12,
            seed=9,
        )
        assert parse_profile(format_profile(profile)) == profile

    def test_defaults_from_empty(self):
        assert parse_profile("# nothing\n") == UserProfile()

    def test_malformed_rejected(self):
        with pytest.raises(SchemaError):
            parse_profile("curiosity breadth\n")

    def test_packaged_default(self):
        import importlib.resources

        text = importlib.resources.files("xtom.data").joinpath("default.profile").read_text()
        profile = parse_profile(text)
        assert parse_profile(text) == UserProfile()
        assert profile.patience == 20
