"""The explanation action space.

A bubble is one explanation turn: it reveals a circular patch of the blurred
image around an attention node, at a spatial extent set by sigma1 and an
unblur level set by sigma2, rendered as an alpha, beta or gamma act. Its
information content is the differential entropy of the two Gaussians, and
each bubble relates to the dialog history through one of five discourse
relations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .aog import ParseGraph, Process, Region
from .errors import EmptyParseGraph, NonpositiveSigma, NotDetected, ZeroContent

SIGMA1_LEVELS = (1.15, 3.15, 4.5)
SIGMA2_LEVELS = (1.0, 9.0, 15.0)


class Discourse(str, Enum):
    ELABORATION = "elaboration"
    SEQUENCE = "sequence"
    RECURRENCE = "recurrence"
    RESTATEMENT = "restatement"
    SUMMARY = "summary"


def content(sigma1: float, sigma2: float) -> float:
    """Information content in nats of a bubble with spatial std ``sigma1``
    and unblur std ``sigma2``: 1 + ln(2*pi*sigma1*sigma2), i.e. the joint
    differential entropy of the two independent Gaussians."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise NonpositiveSigma(f"sigma1={sigma1}, sigma2={sigma2}")
    return 1.0 + 0.5 * math.log(4.0 * math.pi**2 * sigma1**2 * sigma2**2)


@dataclass(frozen=True)
class Bubble:
    """One explanation action: (attention, act, sigma1, sigma2) with the
    derived content, discourse relation, and reveal geometry."""

    attention: str
    act: Process
    sigma1: float
    sigma2: float
    content: float
    discourse: Discourse
    region: Region

    def signature(self) -> tuple[str, str, float, float]:
        return (self.attention, self.act.value, self.sigma1, self.sigma2)


@dataclass
class DialogHistory:
    """Ordered record of what phase 1 has shown and been asked so far."""

    bubbles: list[Bubble] = field(default_factory=list)
    questions: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.bubbles)


@dataclass(frozen=True)
class BubbleSpec:
    """A candidate action before selection: the quadruple minus the derived
    fields, which get filled in against the live history."""

    attention: str
    act: Process
    sigma1: float
    sigma2: float

    def key(self) -> tuple[str, str, float, float]:
        return (self.attention, self.act.value, self.sigma1, self.sigma2)


def enumerate_actions(pg_m: ParseGraph, task=None) -> list[BubbleSpec]:
    """All bubbles the explainer could render from the machine's parse
    graph: task-relevant nodes x the acts each node's detection supports x
    the sigma grid. Order is deterministic (sorted nodes, act enum order,
    sigma grid order)."""
    if pg_m.is_empty():
        raise EmptyParseGraph("cannot enumerate actions over an empty parse graph")
    relevant = _relevant_nodes(pg_m, task)
    specs: list[BubbleSpec] = []
    for nid in sorted(relevant):
        rec = pg_m.detections.get(nid)
        if rec is None:
            continue
        for act in Process:
            if act not in rec.supported:
                continue
            for s1 in SIGMA1_LEVELS:
                for s2 in SIGMA2_LEVELS:
                    specs.append(BubbleSpec(nid, act, s1, s2))
    return specs


def _relevant_nodes(pg_m: ParseGraph, task) -> set[str]:
    """Nodes worth explaining for a task: the critical nodes plus their
    ancestry and parts. Without a task (or with no critical set) every node
    in the parse graph qualifies."""
    critical = set(getattr(task, "critical_nodes", ()) or ())
    if not critical:
        return set(pg_m.node_ids)
    g = pg_m.grammar
    closure = set(critical)
    for nid in critical:
        closure |= g.ancestors(nid)
        closure |= g.descendants(nid)
    return set(pg_m.node_ids) & closure


def _anchor(history: DialogHistory, attention: str) -> Bubble | None:
    """Most recent history bubble on the same attention node."""
    for b in reversed(history.bubbles):
        if b.attention == attention:
            return b
    return None


def classify_discourse(candidate: BubbleSpec, history: DialogHistory) -> Discourse:
    """Relate a candidate bubble to the dialog history.

    Precedence: recurrence (exact quadruple repeat) over summary (same
    attention, coarser but wider than the last bubble there) over
    elaboration (same attention, finer or wider) over restatement (same
    attention otherwise) over sequence (attention unseen).
    """
    for b in history.bubbles:
        if b.signature() == candidate.key():
            return Discourse.RECURRENCE
    anchor = _anchor(history, candidate.attention)
    if anchor is None:
        return Discourse.SEQUENCE
    if candidate.sigma2 < anchor.sigma2 and candidate.sigma1 > anchor.sigma1:
        return Discourse.SUMMARY
    if candidate.sigma1 > anchor.sigma1 or candidate.sigma2 > anchor.sigma2:
        return Discourse.ELABORATION
    return Discourse.RESTATEMENT


def dialog_cost(history: DialogHistory) -> float:
    """Cumulative cost of the dialog so far: sum of reciprocal contents.
    Cheap dialogs say a lot with few, information-dense bubbles."""
    total = 0.0
    for b in history.bubbles:
        if b.content <= 0:
            raise ZeroContent(f"bubble on {b.attention!r} has content {b.content}")
        total += 1.0 / b.content
    return total


def bubble_region(attention: str, sigma1: float, pg_m: ParseGraph) -> Region:
    """Reveal circle for an attention node: centered on its detection,
    radius scaled from the detection radius by sigma1 relative to the
    smallest spatial level, clamped to the half-unit max."""
    rec = pg_m.detections.get(attention)
    if rec is None:
        raise NotDetected(f"{attention!r} carries no detection in the parse graph")
    radius = min(0.5, rec.region.radius * (sigma1 / SIGMA1_LEVELS[0]))
    return Region(rec.region.cx, rec.region.cy, radius)


def make_bubble(spec: BubbleSpec, history: DialogHistory, pg_m: ParseGraph) -> Bubble:
    """Fill in the derived fields of a selected action against the live
    history: content, discourse relation, reveal region."""
    return Bubble(
        attention=spec.attention,
        act=spec.act,
        sigma1=spec.sigma1,
        sigma2=spec.sigma2,
        content=content(spec.sigma1, spec.sigma2),
        discourse=classify_discourse(spec, history),
        region=bubble_region(spec.attention, spec.sigma1, pg_m),
    )
