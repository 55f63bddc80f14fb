import importlib.resources
import math

import numpy as np
import pytest

from xtom.aog import (
    AogEdge,
    AogGrammar,
    AogNode,
    DetectionRecord,
    NodeKind,
    ParseGraph,
    Process,
    Region,
    Relation,
    edge_id,
    parse_grammar,
)
from xtom.engine import World, default_tasks
from xtom.performer import NoiseConfig, Scene, generate_scenes
from xtom.simuser import UserProfile


def fixture_grammar_text() -> str:
    return (
        importlib.resources.files("xtom.data").joinpath("lsp_body.aog").read_text(encoding="utf-8")
    )


@pytest.fixture(scope="session")
def grammar() -> AogGrammar:
    return parse_grammar(fixture_grammar_text())


@pytest.fixture(scope="session")
def scenes(grammar) -> list[Scene]:
    return generate_scenes(grammar, count=6, seed=11)


@pytest.fixture(scope="session")
def world(grammar, scenes) -> World:
    return World(
        grammar=grammar,
        scenes={s.id: s for s in scenes},
        tasks=default_tasks(grammar),
        noise=NoiseConfig(miss_rate=0.15, corrupt_rate=0.1, region_jitter=0.01),
    )


@pytest.fixture(scope="session")
def profile() -> UserProfile:
    return UserProfile()


def chain_grammar(n: int, prefix: str = "n") -> AogGrammar:
    """Linear grammar n0 -> n1 -> ... -> n{k-1}; the leaf is terminal."""
    nodes = []
    edges = []
    for i in range(n):
        kind = NodeKind.TERMINAL if i == n - 1 else NodeKind.AND
        nodes.append(AogNode(f"{prefix}{i}", kind, f"{prefix}{i}"))
        if i:
            parent, child = f"{prefix}{i-1}", f"{prefix}{i}"
            edges.append(
                AogEdge(edge_id(parent, child, Relation.DECOMPOSITION), parent, child, Relation.DECOMPOSITION)
            )
    return AogGrammar(nodes, edges)


def star_grammar(leaves: int, root: str = "root") -> AogGrammar:
    nodes = [AogNode(root, NodeKind.AND, root)]
    edges = []
    for i in range(leaves):
        leaf = f"leaf{i}"
        nodes.append(AogNode(leaf, NodeKind.TERMINAL, leaf))
        edges.append(
            AogEdge(edge_id(root, leaf, Relation.DECOMPOSITION), root, leaf, Relation.DECOMPOSITION)
        )
    return AogGrammar(nodes, edges)


def detection(
    process=Process.ALPHA,
    confidence=1.0,
    region=None,
    correct=True,
    supported=(),
) -> DetectionRecord:
    return DetectionRecord(
        process=process,
        confidence=confidence,
        region=region or Region(0.5, 0.5, 0.1),
        correct=correct,
        supported=supported,
    )


def full_pg(grammar: AogGrammar, correct_nodes=None, processes=None) -> ParseGraph:
    """Parse graph over every grammar node with synthetic detections."""
    correct_nodes = set(grammar.nodes) if correct_nodes is None else set(correct_nodes)
    processes = processes or {}
    detections = {}
    rng = np.random.default_rng(0)
    for nid in grammar.node_order:
        proc = processes.get(nid, Process.ALPHA if grammar.nodes[nid].kind is NodeKind.TERMINAL else Process.BETA)
        detections[nid] = detection(process=proc, correct=nid in correct_nodes)
    return ParseGraph.build(grammar, grammar.nodes.keys(), None, {}, detections)


def content_oracle(s1: float, s2: float) -> float:
    """Independent evaluation of the bubble-information closed form."""
    return 1.0 + 0.5 * math.log(4.0 * math.pi**2 * s1**2 * s2**2)
