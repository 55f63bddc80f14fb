"""Parameterized simulated human.

Stands in for crowd workers during training and ablations: picks questions
by a curiosity strategy, attempts the task once enough task-critical
evidence is revealed, and emits confidence/satisfaction feedback from
simple documented formulas. Everything routes through the profile so
alternate user models can be swapped without touching the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .aog import AogGrammar, NodeKind, ParseGraph
from .bubble import Discourse, DialogHistory
from .errors import Exhausted, SchemaError


class Curiosity(str, Enum):
    BREADTH = "breadth"
    DEPTH = "depth"
    RANDOM = "random"


@dataclass(frozen=True)
class Task:
    """What the user is asked to recognize and which nodes decide it."""

    id: str
    kind: str  # body_part_id | pose_estimation | action_id
    labels: tuple[str, ...]
    critical_nodes: tuple[str, ...]
    answer_source: tuple[str, str] | None = None  # (node-id, slot) holding the answer

    def __post_init__(self):
        if not self.labels:
            raise SchemaError(f"task {self.id!r} has an empty label set")


@dataclass(frozen=True)
class UserProfile:
    curiosity: Curiosity = Curiosity.RANDOM
    evidence_threshold: float = 0.5
    accuracy_given_evidence: float = 0.9
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.evidence_threshold <= 1.0):
            raise SchemaError("evidence_threshold outside [0, 1]")
        if not (0.0 <= self.accuracy_given_evidence <= 1.0):
            raise SchemaError("accuracy_given_evidence outside [0, 1]")
        if self.patience < 1:
            raise SchemaError("patience must be >= 1")


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    subject: str
    depth: int
    critical: bool


@dataclass(frozen=True)
class QuestionCatalog:
    questions: tuple[Question, ...]
    grammar: AogGrammar | None = None

    def __post_init__(self):
        ids = [q.id for q in self.questions]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate question ids in catalog")

    def by_id(self, qid: str) -> Question | None:
        for q in self.questions:
            if q.id == qid:
                return q
        return None

    def subjects(self) -> list[str]:
        return [q.subject for q in self.questions]


def build_catalog(grammar: AogGrammar, task: Task) -> QuestionCatalog:
    """One where/what question per grammar node, critical subjects first.
    Terminals get location questions, composites get identification ones."""
    critical = set(task.critical_nodes)
    order = sorted(critical) + sorted(set(grammar.nodes) - critical)
    questions = []
    for nid in order:
        node = grammar.nodes[nid]
        if node.kind is NodeKind.TERMINAL:
            text = f"where is the {node.label}?"
        else:
            text = f"what shows the {node.label}?"
        questions.append(
            Question(
                id=f"q-{nid}",
                text=text,
                subject=nid,
                depth=grammar.depth[nid],
                critical=nid in critical,
            )
        )
    return QuestionCatalog(tuple(questions), grammar)


def next_question(
    profile: UserProfile,
    catalog: QuestionCatalog,
    revealed: set[str],
    history: DialogHistory,
    rng: np.random.Generator,
) -> str:
    """Pick the next question subject by the curiosity strategy.

    BREADTH: shallowest unrevealed subject, critical before incidental.
    DEPTH: shallowest unrevealed descendant of the last revealed subject,
    falling back to BREADTH when that lineage is exhausted.
    RANDOM: uniform over unrevealed subjects.
    Never re-asks about a fully revealed subject.
    """
    if not catalog.questions:
        raise Exhausted("question catalog is empty")
    open_qs = [q for q in catalog.questions if q.subject not in revealed]
    if not open_qs:
        raise Exhausted("every question subject has been revealed")

    if profile.curiosity is Curiosity.RANDOM:
        return open_qs[int(rng.integers(len(open_qs)))].id

    def breadth_pick(pool):
        return min(pool, key=lambda q: (not q.critical, q.depth, q.subject))

    if profile.curiosity is Curiosity.DEPTH and history.bubbles and catalog.grammar is not None:
        last = history.bubbles[-1].attention
        lineage = catalog.grammar.descendants(last)
        in_lineage = [q for q in open_qs if q.subject in lineage]
        if in_lineage:
            return breadth_pick(in_lineage).id
    return breadth_pick(open_qs).id


def attempt_task(
    profile: UserProfile,
    task: Task,
    revealed: set[str],
    pg_m: ParseGraph,
    rng: np.random.Generator,
) -> tuple[str, int]:
    """Try to answer from revealed evidence.

    With the critical fraction at or past the profile threshold the user
    reads the machine's answer off the parse graph and reports it with
    probability accuracy_given_evidence (otherwise a uniform other label);
    confidence scales with the revealed fraction. Under-evidenced users
    guess uniformly at low confidence.
    """
    frac = len(revealed & set(task.critical_nodes)) / max(1, len(task.critical_nodes))
    machine_answer = _machine_answer(task, pg_m)
    if frac >= profile.evidence_threshold and machine_answer is not None:
        if rng.uniform() < profile.accuracy_given_evidence:
            answer = machine_answer
        else:
            others = [l for l in task.labels if l != machine_answer] or list(task.labels)
            answer = others[int(rng.integers(len(others)))]
        cf = 1 + _round_half_up(4.0 * frac)
    else:
        answer = task.labels[int(rng.integers(len(task.labels)))]
        cf = 1 + _round_half_up(min(1.0, frac))
    return answer, max(1, min(5, cf))


def _machine_answer(task: Task, pg_m: ParseGraph) -> str | None:
    """What the machine believes the answer is, read from the parse graph's
    attribute assignments."""
    if task.answer_source is not None:
        node, slot = task.answer_source
        return pg_m.attributes.get(node, {}).get(slot)
    for nid in sorted(pg_m.attributes):
        for slot in sorted(pg_m.attributes[nid]):
            value = pg_m.attributes[nid][slot]
            if value in task.labels:
                return value
    return None


def rate_satisfaction(history: DialogHistory, task: Task) -> int:
    """Satisfaction 1..5 from bubble relevance (fraction on critical nodes)
    discounted by repeats (recurrence and restatement)."""
    if not history.bubbles:
        return 1
    critical = set(task.critical_nodes)
    relevance = sum(1 for b in history.bubbles if b.attention in critical) / len(history.bubbles)
    repeats = sum(
        1 for b in history.bubbles if b.discourse in (Discourse.RECURRENCE, Discourse.RESTATEMENT)
    )
    coherence = 1.0 - repeats / len(history.bubbles)
    return max(1, min(5, 1 + _round_half_up(4.0 * relevance * coherence)))


def answer_eval_question(
    profile: UserProfile,
    question,
    revealed: set[str],
    pg_m: ParseGraph,
    rng: np.random.Generator,
) -> str:
    """Simulated phase-2 prediction.

    For detection questions: a user who saw the part revealed predicts the
    machine's actual outcome with high probability (slightly lower when the
    machine was wrong, since errors are subtler); unseen parts get a coin
    flip. For influence questions: picks the true strongest influencer when
    the subject was revealed, else uniform."""
    rec = pg_m.detections.get(question.subject)
    seen = question.subject in revealed
    if question.kind == "detect_success":
        actual_yes = rec is not None and rec.correct
        if seen:
            p_match = 0.9 if actual_yes else 0.65
        else:
            p_match = 0.5
        predict_yes = actual_yes if rng.uniform() < p_match else not actual_yes
        return "yes" if predict_yes else "no"
    if not question.choices:
        raise SchemaError(f"influence question {question.id} has no choices")
    if seen and rng.uniform() < 0.7:
        return question.choices[0]
    return question.choices[int(rng.integers(len(question.choices)))]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


# ---------------------------------------------------------------------------
# profile files: key=value lines


def parse_profile(text: str) -> UserProfile:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val
    kwargs: dict = {}
    if "curiosity" in values:
        kwargs["curiosity"] = Curiosity(values["curiosity"])
    for key in ("evidence_threshold", "accuracy_given_evidence"):
        if key in values:
            kwargs[key] = float(values[key])
    for key in ("patience", "seed"):
        if key in values:
            kwargs[key] = int(values[key])
    return UserProfile(**kwargs)


def load_profile(path: str | Path) -> UserProfile:
    return parse_profile(Path(path).read_text(encoding="utf-8"))


def format_profile(profile: UserProfile) -> str:
    return (
        f"curiosity = {profile.curiosity.value}\n"
        f"evidence_threshold = {profile.evidence_threshold}\n"
        f"accuracy_given_evidence = {profile.accuracy_given_evidence}\n"
        f"patience = {profile.patience}\n"
        f"seed = {profile.seed}\n"
    )
