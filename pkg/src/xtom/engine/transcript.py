"""Transcript persistence and replay.

A transcript is the append-only, line-delimited event log of one session.
Replaying its recorded inputs through a fresh engine with the same seed
reproduces the final session state; that property is what makes batch
simulation byte-reproducible and the analytics recomputable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..aog import AogGrammar, DetectionRecord, ParseGraph, Process, Region
from ..belief import TranscriptView
from ..errors import SchemaError
from .session import GameEngine, GameSession, Mode


@dataclass
class GameTranscript:
    events: list[dict]

    @property
    def header(self) -> dict:
        if not self.events or self.events[0].get("event") != "create":
            raise SchemaError("transcript does not start with a create event")
        return self.events[0]

    @property
    def session_id(self) -> str:
        return self.header["session"]

    def asks(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "ask"]

    def attempts(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "attempt"]

    def phase2_event(self) -> dict | None:
        for e in self.events:
            if e["event"] == "phase2":
                return e
        return None

    def succeeded(self) -> bool:
        return any(e["ss"] == 1 for e in self.attempts())

    def bubble_signature_strings(self) -> list[str]:
        out = []
        for e in self.asks():
            b = e["bubble"]
            out.append(f"{b['attention']}|{b['act']}|{b['sigma1']:g}|{b['sigma2']:g}")
        return out

    def view(self, grammar: AogGrammar, critical_nodes: tuple[str, ...]) -> TranscriptView:
        """Project to what likelihood estimation consumes: a node counts as
        demonstrated-grasped when the user solved a task depending on it."""
        grasped = frozenset(critical_nodes) if self.succeeded() else frozenset()
        return TranscriptView(
            questions=tuple(e["question"] for e in self.asks()),
            bubble_signatures=tuple(self.bubble_signature_strings()),
            nodes=grammar.node_order,
            grasped=grasped,
        )

    def machine_parse_graph(self, grammar: AogGrammar) -> ParseGraph:
        return pg_from_wire(self.header["pg_m"], grammar)


def pg_from_wire(wire: dict, grammar: AogGrammar) -> ParseGraph:
    detections = {}
    for nid, rec in wire["nodes"].items():
        if rec is None:
            continue
        detections[nid] = DetectionRecord(
            process=Process(rec["process"]),
            confidence=rec["confidence"],
            region=Region(rec["region"]["cx"], rec["region"]["cy"], rec["region"]["r"]),
            correct=rec["correct"],
            supported=tuple(Process(p) for p in rec["supported"]),
        )
    return ParseGraph.build(
        grammar,
        wire["nodes"].keys(),
        wire["edges"],
        wire.get("attributes", {}),
        detections,
    )


def dump_transcript(session: GameSession) -> str:
    return "\n".join(json.dumps(e, sort_keys=True) for e in session.events) + "\n"


def write_transcript(session: GameSession, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{session.id}.jsonl"
    path.write_text(dump_transcript(session), encoding="utf-8")
    return path


def load_transcript(path: str | Path) -> GameTranscript:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            events.append(json.loads(line))
    if not events:
        raise SchemaError(f"transcript {path} is empty")
    return GameTranscript(events)


def load_transcript_dir(directory: str | Path) -> list[GameTranscript]:
    return [load_transcript(p) for p in sorted(Path(directory).glob("*.jsonl"))]


def replay_transcript(engine: GameEngine, transcript: GameTranscript) -> GameSession:
    """Drive a fresh session with the transcript's recorded inputs."""
    head = transcript.header
    session = engine.create_session(
        scene_id=head["scene"],
        task_id=head["task"],
        mode=Mode(head["mode"]),
        seed=head["seed"],
        session_id=head["session"] + "-replay",
        epsilon=head.get("epsilon", 0.0),
        greedy=head.get("greedy"),
        turn_budget=head.get("turn_budget"),
    )
    for event in transcript.events[1:]:
        kind = event["event"]
        if kind == "ask":
            engine.ask(session, event["question"])
        elif kind == "attempt":
            engine.submit_attempt(
                session,
                event["answer"],
                event["cf"],
                event["sf"],
                response_time_ms=event.get("response_time_ms"),
            )
        elif kind == "phase2":
            engine.run_phase2(session, [tuple(a) for a in event["answers"]])
    return session
