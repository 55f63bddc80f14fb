"""And-Or graph grammar, parse graphs as subgraphs, and the graph algebra
(size, intersection, signed partition) shared by every other module.

A grammar is immutable after load. Parse graphs are value objects over a
grammar: a node-id set, an edge-id set closed under endpoint inclusion,
plus per-node attribute assignments and detection records.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CycleError, DanglingRef, GrammarMismatch, MissingDetection, SchemaError


class NodeKind(str, Enum):
    AND = "AND"
    OR = "OR"
    TERMINAL = "TERMINAL"


class Relation(str, Enum):
    DECOMPOSITION = "decomp"
    CONTEXT = "context"


class Process(str, Enum):
    """The three inference routes a detection can come from; doubles as the
    explanation-act vocabulary."""

    ALPHA = "alpha"
    BETA = "beta"
    GAMMA = "gamma"


PROCESSES = (Process.ALPHA, Process.BETA, Process.GAMMA)


@dataclass(frozen=True)
class Region:
    """Circle in normalized image coordinates."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise SchemaError(f"region center ({self.cx}, {self.cy}) outside unit square")
        if not (0.0 < self.radius <= 0.5):
            raise SchemaError(f"region radius {self.radius} not in (0, 0.5]")

    def contains(self, other: "Region") -> bool:
        d = ((self.cx - other.cx) ** 2 + (self.cy - other.cy) ** 2) ** 0.5
        return d + other.radius <= self.radius + 1e-12


@dataclass(frozen=True)
class DetectionRecord:
    """How one node got into a parse graph.

    ``correct`` is the ground-truth polarity (hidden from users) that the
    trust metrics split on. ``supported`` lists every process that fired for
    the node during interpretation; ``process`` is the one that won.
    """

    process: Process
    confidence: float
    region: Region
    correct: bool
    supported: tuple[Process, ...] = ()

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise SchemaError(f"confidence {self.confidence} outside [0, 1]")
        if not self.supported:
            object.__setattr__(self, "supported", (self.process,))


@dataclass(frozen=True)
class AogNode:
    id: str
    kind: NodeKind
    label: str
    slots: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.label:
            raise SchemaError(f"node {self.id} has empty label")


@dataclass(frozen=True)
class AogEdge:
    id: str
    parent: str
    child: str
    relation: Relation


def edge_id(parent: str, child: str, relation: Relation) -> str:
    sep = ">" if relation is Relation.DECOMPOSITION else "~"
    return f"{parent}{sep}{child}"


class AogGrammar:
    """Validated And-Or graph. Safe to share between threads after load."""

    def __init__(self, nodes: Iterable[AogNode], edges: Iterable[AogEdge]):
        self.nodes: dict[str, AogNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise SchemaError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.edges: dict[str, AogEdge] = {}
        seen = set()
        for e in edges:
            if e.parent not in self.nodes:
                raise DanglingRef(f"edge references unknown parent {e.parent!r}")
            if e.child not in self.nodes:
                raise DanglingRef(f"edge references unknown child {e.child!r}")
            key = (e.parent, e.child, e.relation)
            if key in seen:
                raise SchemaError(f"duplicate edge {key}")
            seen.add(key)
            self.edges[e.id] = e

        self.children: dict[str, tuple[str, ...]] = {nid: () for nid in self.nodes}
        self.parents: dict[str, tuple[str, ...]] = {nid: () for nid in self.nodes}
        for e in self._decomp_edges():
            self.children[e.parent] = self.children[e.parent] + (e.child,)
            self.parents[e.child] = self.parents[e.child] + (e.parent,)

        self.root = self._find_root()
        self._check_acyclic()
        self._check_arity()
        self.topo_order = self._topological_order()
        self.depth = {self.root: 0}
        for nid in self.topo_order[1:]:
            self.depth[nid] = min(self.depth[p] for p in self.parents[nid]) + 1
        self.node_order = tuple(sorted(self.nodes))
        self.edge_order = tuple(sorted(self.edges))
        self.hash = hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def _decomp_edges(self):
        return [e for e in self.edges.values() if e.relation is Relation.DECOMPOSITION]

    def _find_root(self) -> str:
        roots = [nid for nid in self.nodes if not self.parents[nid]]
        if len(roots) != 1:
            raise SchemaError(f"expected exactly one root, found {sorted(roots)}")
        return roots[0]

    def _check_acyclic(self):
        state: dict[str, int] = {}

        def visit(nid: str, trail: tuple[str, ...]):
            if state.get(nid) == 1:
                raise CycleError(f"decomposition cycle through {nid!r}")
            if state.get(nid) == 2:
                return
            state[nid] = 1
            for c in self.children[nid]:
                visit(c, trail + (nid,))
            state[nid] = 2

        for nid in self.nodes:
            visit(nid, ())

    def _check_arity(self):
        for n in self.nodes.values():
            k = len(self.children[n.id])
            if n.kind is NodeKind.TERMINAL and k != 0:
                raise SchemaError(f"terminal {n.id!r} has children")
            if n.kind is NodeKind.OR and k < 2:
                raise SchemaError(f"OR node {n.id!r} has {k} children, needs >= 2")
            if n.kind is NodeKind.AND and k < 1:
                raise SchemaError(f"AND node {n.id!r} has no children")

    def _topological_order(self) -> tuple[str, ...]:
        """Parents-before-children order, deterministic (sorted siblings)."""
        indeg = {nid: len(self.parents[nid]) for nid in self.nodes}
        ready = [self.root]
        order: list[str] = []
        while ready:
            ready.sort(reverse=True)
            nid = ready.pop()
            order.append(nid)
            for c in self.children[nid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self.nodes):
            raise SchemaError("grammar is not connected from the root")
        return tuple(order)

    def canonical_text(self) -> str:
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            slots = " ".join(
                f"{s}={'|'.join(vs)}" for s, vs in sorted(n.slots.items())
            )
            lines.append(f"node {n.id} {n.kind.value} {n.label} {slots}".rstrip())
        for eid in sorted(self.edges):
            e = self.edges[eid]
            lines.append(f"edge {e.parent} {e.child} {e.relation.value}")
        return "\n".join(lines) + "\n"

    def ancestors(self, nid: str) -> set[str]:
        out: set[str] = set()
        stack = list(self.parents[nid])
        while stack:
            p = stack.pop()
            if p not in out:
                out.add(p)
                stack.extend(self.parents[p])
        return out

    def descendants(self, nid: str) -> set[str]:
        out: set[str] = set()
        stack = list(self.children[nid])
        while stack:
            c = stack.pop()
            out.add(c)
            stack.extend(self.children[c])
        return out


@dataclass(frozen=True)
class ParseGraph:
    """Subgraph of a grammar. Role-neutral: the machine's interpretation, the
    projected user belief, and the user's reconstruction all use this type."""

    grammar: AogGrammar
    node_ids: frozenset[str]
    edge_ids: frozenset[str]
    attributes: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    detections: Mapping[str, DetectionRecord] = field(default_factory=dict)

    def __post_init__(self):
        unknown = self.node_ids - set(self.grammar.nodes)
        if unknown:
            raise DanglingRef(f"parse graph nodes not in grammar: {sorted(unknown)}")
        for eid in self.edge_ids:
            e = self.grammar.edges.get(eid)
            if e is None:
                raise DanglingRef(f"parse graph edge not in grammar: {eid!r}")
            if e.parent not in self.node_ids or e.child not in self.node_ids:
                raise DanglingRef(f"edge {eid!r} endpoint missing from parse graph")

    @staticmethod
    def build(
        grammar: AogGrammar,
        node_ids: Iterable[str],
        edge_ids: Iterable[str] | None = None,
        attributes: Mapping[str, Mapping[str, str]] | None = None,
        detections: Mapping[str, DetectionRecord] | None = None,
    ) -> "ParseGraph":
        """Construct with edges filtered to surviving endpoints. When
        ``edge_ids`` is None, every grammar edge between included nodes is
        induced."""
        nodes = frozenset(node_ids)
        if edge_ids is None:
            edges = frozenset(
                eid
                for eid, e in grammar.edges.items()
                if e.parent in nodes and e.child in nodes
            )
        else:
            edges = frozenset(
                eid
                for eid in edge_ids
                if eid in grammar.edges
                and grammar.edges[eid].parent in nodes
                and grammar.edges[eid].child in nodes
            )
        attributes = {v: dict(sl) for v, sl in (attributes or {}).items() if v in nodes}
        detections = {v: d for v, d in (detections or {}).items() if v in nodes}
        return ParseGraph(grammar, nodes, edges, attributes, detections)

    @staticmethod
    def empty(grammar: AogGrammar) -> "ParseGraph":
        return ParseGraph(grammar, frozenset(), frozenset())

    def is_empty(self) -> bool:
        return not self.node_ids

    def sorted_nodes(self) -> list[str]:
        return sorted(self.node_ids)

    def sorted_edges(self) -> list[str]:
        return sorted(self.edge_ids)

    def is_connected(self) -> bool:
        """Whether the included decomposition edges connect all nodes.
        Advisory: intersections and signed partitions routinely break this."""
        if not self.node_ids:
            return True
        adj: dict[str, list[str]] = {v: [] for v in self.node_ids}
        for eid in self.edge_ids:
            e = self.grammar.edges[eid]
            if e.relation is Relation.DECOMPOSITION:
                adj[e.parent].append(e.child)
                adj[e.child].append(e.parent)
        start = next(iter(sorted(self.node_ids)))
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.node_ids)


def pg_size(pg: ParseGraph) -> int:
    """Size of a parse graph: nodes plus edges."""
    return len(pg.node_ids) + len(pg.edge_ids)


def _same_grammar(a: ParseGraph, b: ParseGraph):
    if a.grammar is not b.grammar and a.grammar.hash != b.grammar.hash:
        raise GrammarMismatch("parse graphs come from different grammars")


def pg_intersect(a: ParseGraph, b: ParseGraph) -> ParseGraph:
    """Intersection of node and edge sets. Attribute assignments and
    detection records are taken from the first argument."""
    _same_grammar(a, b)
    nodes = a.node_ids & b.node_ids
    edges = a.edge_ids & b.edge_ids
    return ParseGraph.build(a.grammar, nodes, edges, a.attributes, a.detections)


def signed_partition(pg: ParseGraph) -> tuple[ParseGraph, ParseGraph]:
    """Split by detection correctness: (correctly detected, incorrectly
    detected). Edges survive on the side holding both endpoints."""
    missing = pg.node_ids - set(pg.detections)
    if missing:
        raise MissingDetection(f"nodes without detection records: {sorted(missing)}")
    pos = {v for v in pg.node_ids if pg.detections[v].correct}
    neg = pg.node_ids - pos
    make = lambda nodes: ParseGraph.build(
        pg.grammar, nodes, pg.edge_ids, pg.attributes, pg.detections
    )
    return make(pos), make(neg)


def load_grammar(path: str | Path) -> AogGrammar:
    """Parse the line-oriented grammar file format.

    ``node <id> <AND|OR|TERM> <label> [slot=v1|v2...]``
    ``edge <parent> <child> <decomp|context>``
    ``#`` starts a comment; blank lines ignored.
    """
    return parse_grammar(Path(path).read_text(encoding="utf-8"))


_KINDS = {"AND": NodeKind.AND, "OR": NodeKind.OR, "TERM": NodeKind.TERMINAL}
_RELATIONS = {"decomp": Relation.DECOMPOSITION, "context": Relation.CONTEXT}


def parse_grammar(text: str) -> AogGrammar:
    nodes: list[AogNode] = []
    edges: list[AogEdge] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node":
            if len(parts) < 4:
                raise SchemaError(f"line {lineno}: node needs id, kind, label")
            _, nid, kind, label, *slot_parts = parts
            if kind not in _KINDS:
                raise SchemaError(f"line {lineno}: unknown node kind {kind!r}")
            slots = {}
            for sp in slot_parts:
                if "=" not in sp:
                    raise SchemaError(f"line {lineno}: malformed slot {sp!r}")
                slot, values = sp.split("=", 1)
                vals = tuple(v for v in values.split("|") if v)
                if not slot or not vals:
                    raise SchemaError(f"line {lineno}: malformed slot {sp!r}")
                slots[slot] = vals
            nodes.append(AogNode(nid, _KINDS[kind], label, slots))
        elif parts[0] == "edge":
            if len(parts) != 4:
                raise SchemaError(f"line {lineno}: edge needs parent, child, relation")
            _, parent, child, rel = parts
            if rel not in _RELATIONS:
                raise SchemaError(f"line {lineno}: unknown relation {rel!r}")
            relation = _RELATIONS[rel]
            edges.append(AogEdge(edge_id(parent, child, relation), parent, child, relation))
        else:
            raise SchemaError(f"line {lineno}: unknown record {parts[0]!r}")
    if not nodes:
        raise SchemaError("grammar file declares no nodes")
    return AogGrammar(nodes, edges)
