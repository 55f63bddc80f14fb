"""State featurization for the explainer policy.

The per-turn feature vector is binary throughout: indicator blocks for the
machine's parse graph and for the projected user-belief graph, a one-hot
for the asked question's subject, and one-hots describing the most recent
bubble. The recurrent net consumes the sequence of these vectors over the
dialog turns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..aog import AogGrammar, ParseGraph, Process
from ..belief import BeliefState, project
from ..bubble import SIGMA1_LEVELS, SIGMA2_LEVELS, BubbleSpec, DialogHistory
from ..errors import GrammarMismatch

ACT_ORDER = (Process.ALPHA, Process.BETA, Process.GAMMA)
SIGMA_PAIRS = tuple((s1, s2) for s1 in SIGMA1_LEVELS for s2 in SIGMA2_LEVELS)
BUBBLE_FEATURE_TAIL = len(ACT_ORDER) + len(SIGMA_PAIRS)


def encoding_dim(grammar: AogGrammar) -> int:
    v, e = len(grammar.node_order), len(grammar.edge_order)
    return 2 * (v + e) + v + v + BUBBLE_FEATURE_TAIL


def action_space_size(grammar: AogGrammar) -> int:
    return len(grammar.node_order) * len(ACT_ORDER) * len(SIGMA_PAIRS)


def action_index(grammar: AogGrammar, spec: BubbleSpec) -> int:
    ni = grammar.node_order.index(spec.attention)
    ai = ACT_ORDER.index(spec.act)
    si = SIGMA_PAIRS.index((spec.sigma1, spec.sigma2))
    return (ni * len(ACT_ORDER) + ai) * len(SIGMA_PAIRS) + si


def action_from_index(grammar: AogGrammar, index: int) -> BubbleSpec:
    n_pairs = len(SIGMA_PAIRS)
    n_acts = len(ACT_ORDER)
    si = index % n_pairs
    ai = (index // n_pairs) % n_acts
    ni = index // (n_pairs * n_acts)
    s1, s2 = SIGMA_PAIRS[si]
    return BubbleSpec(grammar.node_order[ni], ACT_ORDER[ai], s1, s2)


def valid_action_mask(grammar: AogGrammar, specs: list[BubbleSpec]) -> np.ndarray:
    mask = np.zeros(action_space_size(grammar), dtype=bool)
    for spec in specs:
        mask[action_index(grammar, spec)] = True
    return mask


@dataclass(frozen=True)
class StateEncoding:
    """One turn's feature vector plus where each block sits in it."""

    vector: np.ndarray
    blocks: dict[str, tuple[int, int]]

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


def encode_state(
    pg_m: ParseGraph,
    belief: BeliefState,
    question_subject: str | None,
    history: DialogHistory,
    grammar: AogGrammar,
    include_belief: bool = True,
) -> StateEncoding:
    """Featurize one dialog turn.

    ``include_belief=False`` zeroes the user-model block; that is the whole
    ablation switch. ``question_subject`` is the grammar node the asked
    question is about (None leaves the block zero).
    """
    if pg_m.grammar.hash != grammar.hash or belief.grammar.hash != grammar.hash:
        raise GrammarMismatch("encoding inputs span different grammars")
    v = len(grammar.node_order)
    e = len(grammar.edge_order)
    node_pos = {nid: k for k, nid in enumerate(grammar.node_order)}
    edge_pos = {eid: k for k, eid in enumerate(grammar.edge_order)}

    vec = np.zeros(encoding_dim(grammar))
    blocks = {}
    off = 0

    blocks["pg_m"] = (off, off + v + e)
    for nid in pg_m.node_ids:
        vec[off + node_pos[nid]] = 1.0
    for eid in pg_m.edge_ids:
        vec[off + v + edge_pos[eid]] = 1.0
    off += v + e

    blocks["belief"] = (off, off + v + e)
    if include_belief:
        projected = project(belief)
        for nid in projected.node_ids:
            vec[off + node_pos[nid]] = 1.0
        for eid in projected.edge_ids:
            vec[off + v + edge_pos[eid]] = 1.0
    off += v + e

    blocks["question"] = (off, off + v)
    if question_subject is not None:
        vec[off + node_pos[question_subject]] = 1.0
    off += v

    blocks["last_bubble"] = (off, off + v + BUBBLE_FEATURE_TAIL)
    if history.bubbles:
        last = history.bubbles[-1]
        vec[off + node_pos[last.attention]] = 1.0
        vec[off + v + ACT_ORDER.index(last.act)] = 1.0
        vec[off + v + len(ACT_ORDER) + SIGMA_PAIRS.index((last.sigma1, last.sigma2))] = 1.0
    off += v + BUBBLE_FEATURE_TAIL

    return StateEncoding(vec, blocks)
