import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xtom.aog import ParseGraph, Process, Region
from xtom.bubble import (
    SIGMA1_LEVELS,
    SIGMA2_LEVELS,
    Bubble,
    BubbleSpec,
    DialogHistory,
    Discourse,
    bubble_region,
    classify_discourse,
    content,
    dialog_cost,
    enumerate_actions,
    make_bubble,
)
from xtom.errors import EmptyParseGraph, NonpositiveSigma, NotDetected, ZeroContent

from .conftest import content_oracle, detection, star_grammar


def bubble_at(attention, act=Process.ALPHA, s1=1.15, s2=1.0, discourse=Discourse.SEQUENCE):
    return Bubble(
        attention=attention,
        act=act,
        sigma1=s1,
        sigma2=s2,
        content=content(s1, s2),
        discourse=discourse,
        region=Region(0.5, 0.5, 0.1),
    )


class TestContent:
    def test_reference_values(self):
        assert content(1.15, 1.0) == pytest.approx(2.9776390087845037, abs=1e-12)
        assert content(4.5, 15.0) == pytest.approx(7.05000466428783, abs=1e-12)

    def test_matches_oracle_on_grid(self):
        for s1 in SIGMA1_LEVELS:
            for s2 in SIGMA2_LEVELS:
                assert content(s1, s2) == pytest.approx(content_oracle(s1, s2), abs=1e-12)

    def test_monotone(self):
        assert content(3.15, 9) > content(1.15, 9) > content(1.15, 1)

    def test_nonpositive_sigma(self):
        with pytest.raises(NonpositiveSigma):
            content(0.0, 1.0)
        with pytest.raises(NonpositiveSigma):
            content(1.0, -2.0)

    def test_symmetric_in_product(self):
        assert content(2.0, 3.0) == pytest.approx(content(3.0, 2.0), abs=1e-12)


class TestEnumerate:
    def test_single_alpha_terminal(self):
        g = star_grammar(1)
        pg = ParseGraph.build(g, ["leaf0"], None, {}, {"leaf0": detection()})
        specs = enumerate_actions(pg)
        assert len(specs) == 9
        assert {s.act for s in specs} == {Process.ALPHA}

    def test_mixed_supported_acts(self):
        g = star_grammar(1)
        detections = {
            "leaf0": detection(supported=(Process.ALPHA,)),
            "root": detection(process=Process.BETA, supported=(Process.BETA, Process.GAMMA)),
        }
        pg = ParseGraph.build(g, ["leaf0", "root"], None, {}, detections)
        specs = enumerate_actions(pg)
        assert len(specs) == 27

    def test_empty_pg(self, grammar):
        with pytest.raises(EmptyParseGraph):
            enumerate_actions(ParseGraph.empty(grammar))

    def test_deterministic_order(self):
        g = star_grammar(2)
        pg = ParseGraph.build(
            g, ["leaf0", "leaf1"], None, {}, {n: detection() for n in ("leaf0", "leaf1")}
        )
        a = [s.key() for s in enumerate_actions(pg)]
        b = [s.key() for s in enumerate_actions(pg)]
        assert a == b == sorted(a, key=lambda k: (k[0],))


def oracle_discourse(candidate: BubbleSpec, history: list[Bubble]) -> Discourse:
    """Literal restatement of the five rules, checked one by one."""
    for b in history:
        if (
            b.attention == candidate.attention
            and b.act == candidate.act
            and b.sigma1 == candidate.sigma1
            and b.sigma2 == candidate.sigma2
        ):
            return Discourse.RECURRENCE
    same_attention = [b for b in history if b.attention == candidate.attention]
    if not same_attention:
        return Discourse.SEQUENCE
    last = same_attention[-1]
    if candidate.sigma1 > last.sigma1 and candidate.sigma2 < last.sigma2:
        return Discourse.SUMMARY
    if candidate.sigma1 > last.sigma1 or candidate.sigma2 > last.sigma2:
        return Discourse.ELABORATION
    return Discourse.RESTATEMENT


class TestDiscourse:
    def test_empty_history_is_sequence(self):
        cand = BubbleSpec("arm", Process.ALPHA, 1.15, 1.0)
        assert classify_discourse(cand, DialogHistory()) is Discourse.SEQUENCE

    def test_exact_repeat_is_recurrence(self):
        h = DialogHistory(bubbles=[bubble_at("arm")])
        cand = BubbleSpec("arm", Process.ALPHA, 1.15, 1.0)
        assert classify_discourse(cand, h) is Discourse.RECURRENCE

    def test_scale_increase_is_elaboration(self):
        h = DialogHistory(bubbles=[bubble_at("arm", s1=1.15, s2=9.0)])
        cand = BubbleSpec("arm", Process.ALPHA, 3.15, 9.0)
        assert classify_discourse(cand, h) is Discourse.ELABORATION

    def test_wider_but_coarser_is_summary(self):
        h = DialogHistory(bubbles=[bubble_at("arm", s1=1.15, s2=15.0)])
        cand = BubbleSpec("arm", Process.ALPHA, 4.5, 1.0)
        assert classify_discourse(cand, h) is Discourse.SUMMARY

    def test_same_sigmas_different_act_is_restatement(self):
        h = DialogHistory(bubbles=[bubble_at("arm", act=Process.ALPHA)])
        cand = BubbleSpec("arm", Process.BETA, 1.15, 1.0)
        assert classify_discourse(cand, h) is Discourse.RESTATEMENT

    def test_agrees_with_oracle_randomized(self):
        rng = np.random.default_rng(42)
        attentions = ["a", "b", "c"]
        acts = list(Process)
        for _ in range(500):
            history = DialogHistory(
                bubbles=[
                    bubble_at(
                        attentions[rng.integers(3)],
                        acts[rng.integers(3)],
                        SIGMA1_LEVELS[rng.integers(3)],
                        SIGMA2_LEVELS[rng.integers(3)],
                    )
                    for _ in range(rng.integers(0, 7))
                ]
            )
            cand = BubbleSpec(
                attentions[rng.integers(3)],
                acts[rng.integers(3)],
                SIGMA1_LEVELS[rng.integers(3)],
                SIGMA2_LEVELS[rng.integers(3)],
            )
            assert classify_discourse(cand, history) is oracle_discourse(cand, history.bubbles)


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_discourse_total_function(data):
    atts = ["x", "y"]
    mk = lambda: bubble_at(
        data.draw(st.sampled_from(atts)),
        data.draw(st.sampled_from(list(Process))),
        data.draw(st.sampled_from(SIGMA1_LEVELS)),
        data.draw(st.sampled_from(SIGMA2_LEVELS)),
    )
    history = DialogHistory(bubbles=[mk() for _ in range(data.draw(st.integers(0, 5)))])
    b = mk()
    cand = BubbleSpec(b.attention, b.act, b.sigma1, b.sigma2)
    assert classify_discourse(cand, history) in Discourse


class TestCost:
    def test_empty_history(self):
        assert dialog_cost(DialogHistory()) == 0.0

    def test_single_bubble(self):
        h = DialogHistory(bubbles=[bubble_at("arm", s1=1.15, s2=1.0)])
        assert dialog_cost(h) == pytest.approx(0.33583654601845375, abs=1e-12)

    def test_two_bubbles(self):
        h = DialogHistory(
            bubbles=[bubble_at("arm", s1=1.15, s2=1.0), bubble_at("leg", s1=4.5, s2=15.0)]
        )
        assert dialog_cost(h) == pytest.approx(0.4776804238055924, abs=1e-12)

    def test_monotone_in_length(self):
        bubbles = []
        prev = 0.0
        for i in range(6):
            bubbles.append(bubble_at(f"n{i}"))
            cost = dialog_cost(DialogHistory(bubbles=list(bubbles)))
            assert cost > prev
            prev = cost

    def test_dense_bubble_adds_less(self):
        small = dialog_cost(DialogHistory(bubbles=[bubble_at("a", s1=1.15, s2=1.0)]))
        big = dialog_cost(DialogHistory(bubbles=[bubble_at("a", s1=4.5, s2=15.0)]))
        assert big < small

    def test_zero_content_rejected(self):
        bad = Bubble("a", Process.ALPHA, 1.15, 1.0, 0.0, Discourse.SEQUENCE, Region(0.5, 0.5, 0.1))
        with pytest.raises(ZeroContent):
            dialog_cost(DialogHistory(bubbles=[bad]))


class TestRegion:
    def test_unit_scale_unchanged(self):
        g = star_grammar(1)
        pg = ParseGraph.build(g, ["leaf0"], None, {}, {"leaf0": detection(region=Region(0.4, 0.4, 0.1))})
        r = bubble_region("leaf0", 1.15, pg)
        assert r.radius == pytest.approx(0.1)
        assert (r.cx, r.cy) == (0.4, 0.4)

    def test_scaling(self):
        g = star_grammar(1)
        pg = ParseGraph.build(g, ["leaf0"], None, {}, {"leaf0": detection(region=Region(0.4, 0.4, 0.1))})
        assert bubble_region("leaf0", 4.5, pg).radius == pytest.approx(0.391304347826087)

    def test_clamped(self):
        g = star_grammar(1)
        pg = ParseGraph.build(g, ["leaf0"], None, {}, {"leaf0": detection(region=Region(0.4, 0.4, 0.2))})
        assert bubble_region("leaf0", 4.5, pg).radius == 0.5

    def test_not_detected(self, grammar):
        pg = ParseGraph.build(grammar, ["person"], None, {}, {})
        with pytest.raises(NotDetected):
            bubble_region("person", 1.15, pg)


def test_make_bubble_fills_derived_fields():
    g = star_grammar(1)
    pg = ParseGraph.build(g, ["leaf0"], None, {}, {"leaf0": detection(region=Region(0.4, 0.4, 0.1))})
    spec = BubbleSpec("leaf0", Process.ALPHA, 3.15, 9.0)
    b = make_bubble(spec, DialogHistory(), pg)
    assert b.discourse is Discourse.SEQUENCE
    assert b.content == pytest.approx(content_oracle(3.15, 9.0), abs=1e-12)
    assert b.region.radius == pytest.approx(0.1 * 3.15 / 1.15)
