"""Simulated image interpretation.

Produces the machine's parse graph from a ground-truth annotated scene via
three routes: alpha (direct detection of terminals), beta (bottom-up binding
of detected children), gamma (top-down from a detected parent). A noise model
injects misses and corrupted detections so that the negative-trust metrics
have something to measure.

Sampling order contract (what makes runs replayable from the seed): the RNG
stream is consumed strictly in this order.

1. alpha pass over annotated terminals in sorted node-id order; per node:
   one uniform draw for the miss test; if detected, two normal draws for the
   center jitter, then one uniform draw for the corruption test.
2. beta pass over non-terminals in reverse topological order (children
   first, sorted siblings); no draws.
3. gamma pass over still-undetected annotated nodes in topological order
   (parents first); per inferred node one uniform draw for corruption.
4. attribute pass over included nodes in sorted id order; a corrupted slot
   value consumes one integer draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aog import (
    AogGrammar,
    DetectionRecord,
    NodeKind,
    ParseGraph,
    Process,
    Region,
)
from .errors import GrammarMismatch, NoChildren, NoParent, NotTerminal, SchemaError

BINDING_THRESHOLD = 0.5
GAMMA_DISCOUNT = 0.8
CORRUPT_CONFIDENCE = 0.5


@dataclass(frozen=True)
class NoiseConfig:
    """Error model for the simulated performer."""

    miss_rate: float = 0.0
    corrupt_rate: float = 0.0
    region_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("miss_rate", "corrupt_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise SchemaError(f"{name}={v} outside [0, 1]")
        if self.region_jitter < 0:
            raise SchemaError("region_jitter must be >= 0")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class Scene:
    """Ground-truth annotated scene: where every part really is, plus the
    answer label for the task played on it."""

    id: str
    task_label: str
    parts: dict[str, Region] = field(default_factory=dict)
    image_ref: str | None = None


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def alpha_detect(
    node_id: str,
    scene: Scene,
    grammar: AogGrammar,
    noise: NoiseConfig,
    rng: np.random.Generator,
) -> DetectionRecord | None:
    """Direct detection of a terminal, no context. Misses with probability
    miss_rate; otherwise returns the jittered truth region, corrupted with
    probability corrupt_rate."""
    node = grammar.nodes.get(node_id)
    if node is None or node.kind is not NodeKind.TERMINAL:
        raise NotTerminal(f"{node_id!r} is not a terminal node")
    truth = scene.parts.get(node_id)
    if truth is None:
        return None
    if rng.uniform() < noise.miss_rate:
        return None
    dx, dy = rng.normal(0.0, 1.0, size=2) * noise.region_jitter
    correct = rng.uniform() >= noise.corrupt_rate
    if correct:
        region = Region(_clip01(truth.cx + dx), _clip01(truth.cy + dy), truth.radius)
        confidence = 1.0
    else:
        # wrong detection lands visibly off the true part
        off = max(noise.region_jitter, 2.0 * truth.radius)
        region = Region(_clip01(truth.cx + dx + off), _clip01(truth.cy + dy + off), truth.radius)
        confidence = CORRUPT_CONFIDENCE
    return DetectionRecord(Process.ALPHA, confidence, region, correct)


def _bounding_circle(regions: list[Region]) -> Region:
    cx = sum(r.cx for r in regions) / len(regions)
    cy = sum(r.cy for r in regions) / len(regions)
    radius = max(((r.cx - cx) ** 2 + (r.cy - cy) ** 2) ** 0.5 + r.radius for r in regions)
    return Region(_clip01(cx), _clip01(cy), min(0.5, max(radius, 1e-6)))


def beta_infer(
    node_id: str,
    grammar: AogGrammar,
    child_records: dict[str, DetectionRecord],
    threshold: float = BINDING_THRESHOLD,
) -> DetectionRecord | None:
    """Bottom-up binding: infer a composite once enough of its children are
    detected. Region is a circle covering the children; confidence is their
    mean; the inference is correct only if every bound child was."""
    children = grammar.children.get(node_id, ())
    if not children:
        raise NoChildren(f"{node_id!r} has no decomposition children")
    present = [child_records[c] for c in sorted(child_records) if c in children]
    if not present or len(present) / len(children) < threshold:
        return None
    confidence = sum(r.confidence for r in present) / len(present)
    region = _bounding_circle([r.region for r in present])
    correct = all(r.correct for r in present)
    return DetectionRecord(Process.BETA, confidence, region, correct)


def gamma_infer(
    node_id: str,
    scene: Scene,
    parent_record: DetectionRecord | None,
    noise: NoiseConfig,
    rng: np.random.Generator,
    discount: float = GAMMA_DISCOUNT,
) -> DetectionRecord | None:
    """Top-down contextual inference from a detected parent. Only works for
    nodes the scene annotates (context tells the performer where to look)."""
    if parent_record is None:
        raise NoParent(f"{node_id!r} has no detected parent")
    truth = scene.parts.get(node_id)
    if truth is None:
        return None
    correct = parent_record.correct and rng.uniform() >= noise.corrupt_rate
    confidence = parent_record.confidence * discount
    return DetectionRecord(Process.GAMMA, confidence, truth, correct)


def interpret(scene: Scene, grammar: AogGrammar, noise: NoiseConfig) -> ParseGraph:
    """Run the three inference passes and assemble the machine's parse graph.

    Per node the winning process follows the alpha > beta > gamma precedence;
    every process that fired is kept on the record's ``supported`` tuple so
    the explainer knows which acts it can render. Deterministic given the
    noise seed.
    """
    unknown = set(scene.parts) - set(grammar.nodes)
    if unknown:
        raise GrammarMismatch(f"scene annotates unknown nodes: {sorted(unknown)}")
    rng = noise.rng()
    records: dict[str, DetectionRecord] = {}

    for nid in sorted(scene.parts):
        if grammar.nodes[nid].kind is NodeKind.TERMINAL:
            rec = alpha_detect(nid, scene, grammar, noise, rng)
            if rec is not None:
                records[nid] = rec

    for nid in reversed(grammar.topo_order):
        if grammar.nodes[nid].kind is NodeKind.TERMINAL:
            continue
        child_records = {c: records[c] for c in grammar.children[nid] if c in records}
        rec = beta_infer(nid, grammar, child_records) if child_records else None
        if rec is not None:
            records[nid] = rec

    for nid in grammar.topo_order:
        detected_parents = [p for p in sorted(grammar.parents[nid]) if p in records]
        if not detected_parents:
            continue
        parent_rec = records[detected_parents[0]]
        if nid in records:
            if Process.GAMMA not in records[nid].supported:
                prev = records[nid]
                records[nid] = DetectionRecord(
                    prev.process, prev.confidence, prev.region, prev.correct,
                    prev.supported + (Process.GAMMA,),
                )
            continue
        if nid not in scene.parts:
            continue
        rec = gamma_infer(nid, scene, parent_rec, noise, rng)
        if rec is not None:
            records[nid] = rec

    attributes: dict[str, dict[str, str]] = {}
    for nid in sorted(records):
        node = grammar.nodes[nid]
        for slot, values in sorted(node.slots.items()):
            if scene.task_label in values:
                if records[nid].correct:
                    attributes.setdefault(nid, {})[slot] = scene.task_label
                else:
                    others = [v for v in values if v != scene.task_label]
                    pick = others[int(rng.integers(len(others)))] if others else scene.task_label
                    attributes.setdefault(nid, {})[slot] = pick

    return ParseGraph.build(grammar, records.keys(), None, attributes, records)


# ---------------------------------------------------------------------------
# scene file format


def parse_scenes(text: str) -> list[Scene]:
    """Record-per-line scene format. ``scene <id> <task-label> [image-ref]``
    opens a record; subsequent ``part <node-id> <cx> <cy> <r>`` lines attach
    ground-truth placements to it."""
    scenes: list[Scene] = []
    current: dict | None = None

    def flush():
        if current is not None:
            scenes.append(Scene(current["id"], current["label"], current["parts"], current["image"]))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "scene":
            if len(parts) not in (3, 4):
                raise SchemaError(f"line {lineno}: scene needs id and task-label")
            flush()
            current = {
                "id": parts[1],
                "label": parts[2],
                "image": parts[3] if len(parts) == 4 else None,
                "parts": {},
            }
        elif parts[0] == "part":
            if current is None:
                raise SchemaError(f"line {lineno}: part before any scene record")
            if len(parts) != 5:
                raise SchemaError(f"line {lineno}: part needs node-id, cx, cy, r")
            try:
                cx, cy, r = (float(x) for x in parts[2:5])
            except ValueError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            current["parts"][parts[1]] = Region(cx, cy, r)
        else:
            raise SchemaError(f"line {lineno}: unknown record {parts[0]!r}")
    flush()
    return scenes


def load_scenes(path: str | Path) -> list[Scene]:
    return parse_scenes(Path(path).read_text(encoding="utf-8"))


def format_scene(scene: Scene) -> str:
    head = f"scene {scene.id} {scene.task_label}"
    if scene.image_ref:
        head += f" {scene.image_ref}"
    lines = [head]
    for nid in sorted(scene.parts):
        r = scene.parts[nid]
        lines.append(f"part {nid} {r.cx:.6f} {r.cy:.6f} {r.radius:.6f}")
    return "\n".join(lines) + "\n"


def generate_scenes(
    grammar: AogGrammar,
    count: int,
    seed: int,
    label_slot: str | None = None,
) -> list[Scene]:
    """Emit randomized fixture scenes: every grammar node gets a plausible
    region laid out down the hierarchy, jittered per scene."""
    rng = np.random.default_rng(seed)
    slot_node = None
    for nid in grammar.topo_order:
        for slot, values in sorted(grammar.nodes[nid].slots.items()):
            if label_slot is None or slot == label_slot:
                slot_node, label_slot, label_values = nid, slot, values
                break
        if slot_node:
            break
    if slot_node is None:
        label_values = ("default",)

    scenes = []
    for i in range(count):
        label = label_values[int(rng.integers(len(label_values)))]
        parts: dict[str, Region] = {}
        parts[grammar.root] = Region(0.5, 0.5, 0.38)
        for nid in grammar.topo_order[1:]:
            parent = sorted(grammar.parents[nid])[0]
            pr = parts[parent]
            siblings = sorted(grammar.children[parent])
            k, n = siblings.index(nid), len(siblings)
            angle = 2 * np.pi * (k + 0.5) / n + rng.normal(0, 0.1)
            dist = pr.radius * 0.55
            cx = _clip01(pr.cx + dist * np.cos(angle) + rng.normal(0, 0.01))
            cy = _clip01(pr.cy + dist * np.sin(angle) + rng.normal(0, 0.01))
            radius = max(0.02, pr.radius * (0.45 + rng.uniform(-0.05, 0.05)))
            parts[nid] = Region(cx, cy, min(0.5, radius))
        scenes.append(Scene(f"scene-{i:04d}", label, parts))
    return scenes
