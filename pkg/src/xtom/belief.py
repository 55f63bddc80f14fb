"""The machine's running model of what the user has grasped.

Each grammar node carries an independent posterior probability that the
user has seen and understood it. Evidence arrives two ways: the questions
the user chooses to ask, and the bubbles the explainer has shown. Question
and bubble likelihoods are frequency estimates over completed game logs,
conditioned on whether the node was ultimately demonstrated grasped (the
user solved a task that depends on it).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .aog import AogGrammar, ParseGraph
from .bubble import Bubble, DialogHistory
from .errors import EmptyLogs, SchemaError

TABLES_VERSION = 1
DEFAULT_PROJECT_THRESHOLD = 0.5
REVEAL_FLOOR_STRONG = 0.9   # unblur sigma2 >= 9
REVEAL_FLOOR_LIGHT = 0.6    # attention node of a lightly unblurred bubble
STRONG_SIGMA2 = 9.0

_ODDS_CAP = 1.0 - 1e-12


def bubble_signature(b: Bubble) -> str:
    return f"{b.attention}|{b.act.value}|{b.sigma1:g}|{b.sigma2:g}"


@dataclass(frozen=True)
class BeliefState:
    """Per-node grasp posterior. Starts all-zero: a fresh user has seen
    nothing, so the projected graph is empty."""

    grammar: AogGrammar
    grasp: dict[str, float]
    turn: int = 0
    bubbles_seen: int = 0


@dataclass(frozen=True)
class TranscriptView:
    """What likelihood estimation needs from one finished game."""

    questions: tuple[str, ...]
    bubble_signatures: tuple[str, ...]
    nodes: tuple[str, ...]
    grasped: frozenset[str]


class LikelihoodTables:
    """Laplace-smoothed frequency tables.

    For an evidence event e (a question id or a bubble signature) and node v,
    p(e | v grasped) = (n_grasped + 1) / (n_grasped + n_not + 2), its
    complement conditioned on not-grasped; the two rows of a pair sum to 1.
    Unseen pairs fall back to 0.5 each, a likelihood ratio of one.
    """

    def __init__(
        self,
        q_counts: dict[tuple[str, str], list[int]] | None = None,
        h_counts: dict[tuple[str, str], list[int]] | None = None,
        games: int = 0,
    ):
        self.q_counts = q_counts or {}
        self.h_counts = h_counts or {}
        self.games = games

    @staticmethod
    def uninformative() -> "LikelihoodTables":
        return LikelihoodTables()

    @staticmethod
    def _prob(counts: list[int] | None, grasped: bool) -> float:
        if counts is None:
            return 0.5
        n_g, n_n = counts
        c = n_g if grasped else n_n
        return (c + 1.0) / (n_g + n_n + 2.0)

    def p_question(self, question: str, node: str, grasped: bool) -> float:
        return self._prob(self.q_counts.get((question, node)), grasped)

    def p_bubble(self, signature: str, node: str, grasped: bool) -> float:
        return self._prob(self.h_counts.get((signature, node)), grasped)

    def lr_question(self, question: str, node: str) -> float:
        c = self.q_counts.get((question, node))
        if c is None:
            return 1.0
        return (c[0] + 1.0) / (c[1] + 1.0)

    def lr_bubble(self, signature: str, node: str) -> float:
        c = self.h_counts.get((signature, node))
        if c is None:
            return 1.0
        return (c[0] + 1.0) / (c[1] + 1.0)

    # -- persistence -------------------------------------------------------

    def to_json(self) -> str:
        def pack(counts):
            return {f"{k[0]}\t{k[1]}": v for k, v in sorted(counts.items())}

        return json.dumps(
            {
                "version": TABLES_VERSION,
                "games": self.games,
                "q": pack(self.q_counts),
                "h": pack(self.h_counts),
            },
            indent=0,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "LikelihoodTables":
        doc = json.loads(text)
        if doc.get("version") != TABLES_VERSION:
            raise SchemaError(f"unsupported tables version {doc.get('version')!r}")

        def unpack(obj):
            out = {}
            for key, v in obj.items():
                a, b = key.split("\t")
                out[(a, b)] = [int(v[0]), int(v[1])]
            return out

        return LikelihoodTables(unpack(doc["q"]), unpack(doc["h"]), int(doc.get("games", 0)))

    def save(self, path: str | Path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "LikelihoodTables":
        return LikelihoodTables.from_json(Path(path).read_text(encoding="utf-8"))


def init_belief(grammar: AogGrammar) -> BeliefState:
    return BeliefState(grammar, {nid: 0.0 for nid in grammar.node_order})


def estimate_likelihoods(logs: list[TranscriptView]) -> LikelihoodTables:
    """Count question and bubble occurrences against each node's eventual
    grasp outcome across many games."""
    if not logs:
        raise EmptyLogs("need at least one transcript to estimate likelihoods")
    q_counts: dict[tuple[str, str], list[int]] = {}
    h_counts: dict[tuple[str, str], list[int]] = {}
    for view in logs:
        for node in view.nodes:
            idx = 0 if node in view.grasped else 1
            for q in view.questions:
                q_counts.setdefault((q, node), [0, 0])[idx] += 1
            for sig in view.bubble_signatures:
                h_counts.setdefault((sig, node), [0, 0])[idx] += 1
    return LikelihoodTables(q_counts, h_counts, games=len(logs))


def update_belief(
    belief: BeliefState,
    question: str,
    history: DialogHistory,
    task,
    tables: LikelihoodTables,
    node_regions: dict | None = None,
) -> BeliefState:
    """One turn of Bayesian bookkeeping.

    Per node, posterior odds = prior odds x the likelihood ratio of the new
    question x the ratios of bubbles not yet incorporated. A node at zero
    that informative evidence touches starts from even odds (the uniform
    prior); a node at zero that nothing touches stays at zero. On top of the
    odds update, a direct reveal forces a floor: the attention node of any
    new bubble rises to at least 0.6, to 0.9 when the unblur is strong, and
    with ``node_regions`` any node fully inside a strongly unblurred circle
    gets the strong floor too.
    """
    new_bubbles = history.bubbles[belief.bubbles_seen :]
    grasp = dict(belief.grasp)
    for node in belief.grammar.node_order:
        lr = tables.lr_question(question, node)
        for b in new_bubbles:
            lr *= tables.lr_bubble(bubble_signature(b), node)
        if lr == 1.0:
            continue  # untouched by informative evidence; exact fixed point
        cur = grasp[node]
        if cur <= 0.0:
            odds = 1.0  # first informative touch starts from the uniform prior
        else:
            p = min(cur, _ODDS_CAP)
            odds = p / (1.0 - p)
        post = odds * lr
        grasp[node] = post / (1.0 + post)

    for b in new_bubbles:
        strong = b.sigma2 >= STRONG_SIGMA2
        floor = REVEAL_FLOOR_STRONG if strong else REVEAL_FLOOR_LIGHT
        grasp[b.attention] = max(grasp[b.attention], floor)
        if strong and node_regions:
            for node, region in node_regions.items():
                if node in grasp and b.region.contains(region):
                    grasp[node] = max(grasp[node], REVEAL_FLOOR_STRONG)

    for node, value in grasp.items():
        grasp[node] = min(1.0, max(0.0, value))

    return BeliefState(
        belief.grammar,
        grasp,
        turn=belief.turn + 1,
        bubbles_seen=len(history.bubbles),
    )


def project(belief: BeliefState, threshold: float = DEFAULT_PROJECT_THRESHOLD) -> ParseGraph:
    """Realize the belief as a parse graph: nodes at or above the grasp
    threshold, with every grammar edge whose endpoints both survive."""
    if not (0.0 < threshold < 1.0):
        raise SchemaError(f"threshold {threshold} not in (0, 1)")
    nodes = {nid for nid, g in belief.grasp.items() if g >= threshold}
    return ParseGraph.build(belief.grammar, nodes)
