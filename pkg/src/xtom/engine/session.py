"""Game session state machine.

Phase 1: the user asks catalog questions, the policy answers each with a
bubble, the user attempts the task and rates the exchange. Phase 2: the
evaluator asks the user to predict the machine's detections and scores
trust from the overlap. Sessions are isolated; one request at a time each.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

import numpy as np

from ..aog import AogGrammar, ParseGraph, Region
from ..belief import BeliefState, LikelihoodTables, init_belief, update_belief
from ..bubble import (
    Bubble,
    DialogHistory,
    dialog_cost,
    enumerate_actions,
    make_bubble,
)
from ..errors import (
    NoBubblesYet,
    TurnLimit,
    UnknownQuestion,
    UnknownScene,
    UnknownSession,
    UnknownTask,
    WrongPhase,
)
from ..evaluator import (
    EvalQuestion,
    SatisfactionSurvey,
    TrustReport,
    assemble_minu,
    collect_satisfaction,
    generate_eval_questions,
    trust_report,
)
from ..performer import NoiseConfig, Scene, interpret
from ..policy import (
    FeedbackRecord,
    PolicyParams,
    action_from_index,
    encode_state,
    heads,
    initial_state,
    reward as turn_reward,
    select_action,
    step as policy_step,
    valid_action_mask,
)
from ..simuser import QuestionCatalog, Task, build_catalog

STRONG_REVEAL_SIGMA2 = 9.0
DEFAULT_TURN_LIMIT = 30


class Phase(str, Enum):
    PHASE1 = "phase1"
    PHASE2 = "phase2"
    DONE = "done"


class Mode(str, Enum):
    HUMAN = "human"
    SIMULATED = "simulated"


@dataclass
class PendingStep:
    state_bits: np.ndarray
    action: int
    behavior_prob: float
    valid_mask: np.ndarray
    turn: int
    reward: float = 0.0


@dataclass
class GameSession:
    id: str
    scene: Scene
    task: Task
    mode: Mode
    seed: int
    pg_m: ParseGraph
    belief: BeliefState
    catalog: QuestionCatalog
    turn_budget: int
    epsilon: float
    greedy: bool
    phase: Phase = Phase.PHASE1
    history: DialogHistory = field(default_factory=DialogHistory)
    feedback: list[FeedbackRecord] = field(default_factory=list)
    turn: int = 0
    attempts: int = 0
    succeeded: bool = False
    revealed: set[str] = field(default_factory=set)
    rec_state: tuple | None = None
    rng: np.random.Generator | None = None
    pending: list[PendingStep] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    eval_questions: list[EvalQuestion] = field(default_factory=list)
    report: TrustReport | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    clock: int = 0

    def stamp(self) -> int:
        self.clock += 1
        return self.clock

    def record(self, kind: str, **fields) -> dict:
        """Append an event. Simulated sessions log only the logical clock so
        transcripts stay byte-reproducible; human sessions get wall time."""
        event = {"event": kind, "ts": self.stamp(), **fields}
        if self.mode is Mode.HUMAN:
            event["at"] = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        self.events.append(event)
        return event


@dataclass
class World:
    """Immutable assets a batch of sessions plays over."""

    grammar: AogGrammar
    scenes: dict[str, Scene]
    tasks: dict[str, Task]
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def task_for_scene(self, scene: Scene) -> str:
        """The task this scene's ground-truth label belongs to."""
        for task_id in sorted(self.tasks):
            if scene.task_label in self.tasks[task_id].labels:
                return task_id
        raise UnknownTask(f"no task covers scene label {scene.task_label!r}")


def default_tasks(grammar: AogGrammar) -> dict[str, Task]:
    """One recognition task per attribute slot: the label set is the slot's
    values, the critical evidence is the slot's node plus everything it
    decomposes into (recognizing an action takes the whole body)."""
    tasks = {}
    for nid in grammar.topo_order:
        node = grammar.nodes[nid]
        for slot, values in sorted(node.slots.items()):
            if slot in tasks:
                continue
            kind = "action_id" if slot == "action" else "pose_estimation"
            critical = tuple(sorted({nid} | grammar.descendants(nid)))
            tasks[slot] = Task(
                id=slot,
                kind=kind,
                labels=values,
                critical_nodes=critical,
                answer_source=(nid, slot),
            )
    return tasks


def _region_wire(region: Region) -> dict:
    return {"cx": region.cx, "cy": region.cy, "r": region.radius}


def bubble_wire(b: Bubble) -> dict:
    return {
        "attention": b.attention,
        "act": b.act.value,
        "sigma1": b.sigma1,
        "sigma2": b.sigma2,
        "discourse": b.discourse.value,
        "content": b.content,
        "region": _region_wire(b.region),
    }


class GameEngine:
    """Runs sessions against one grammar, policy checkpoint and likelihood
    tables. The policy parameters are treated as read-only here; training
    swaps whole engines (or parameter snapshots) between rollout rounds."""

    def __init__(
        self,
        world: World,
        params: PolicyParams,
        tables: LikelihoodTables | None = None,
        turn_limit: int = DEFAULT_TURN_LIMIT,
        ablated: bool = False,
        transcript_dir=None,
    ):
        self.world = world
        self.params = params
        self.tables = tables or LikelihoodTables.uninformative()
        self.turn_limit = turn_limit
        self.ablated = ablated
        self.transcript_dir = transcript_dir
        self.sessions: dict[str, GameSession] = {}
        self._registry_lock = threading.Lock()
        self._catalogs: dict[str, QuestionCatalog] = {}

    def _persist(self, session: GameSession):
        if self.transcript_dir is None:
            return
        from .transcript import write_transcript

        write_transcript(session, self.transcript_dir)

    # -- setup ---------------------------------------------------------------

    def catalog_for(self, task_id: str) -> QuestionCatalog:
        if task_id not in self.world.tasks:
            raise UnknownTask(f"no task {task_id!r}")
        if task_id not in self._catalogs:
            self._catalogs[task_id] = build_catalog(self.world.grammar, self.world.tasks[task_id])
        return self._catalogs[task_id]

    def create_session(
        self,
        scene_id: str,
        task_id: str,
        mode: Mode = Mode.SIMULATED,
        seed: int = 0,
        session_id: str | None = None,
        epsilon: float = 0.0,
        greedy: bool | None = None,
        turn_budget: int | None = None,
    ) -> GameSession:
        scene = self.world.scenes.get(scene_id)
        if scene is None:
            raise UnknownScene(f"no scene {scene_id!r}")
        if task_id not in self.world.tasks:
            raise UnknownTask(f"no task {task_id!r}")
        task = self.world.tasks[task_id]
        if scene.task_label not in task.labels:
            raise UnknownTask(
                f"task {task_id!r} cannot be played on scene {scene_id!r}: "
                f"label {scene.task_label!r} is not among {task.labels}"
            )
        noise = NoiseConfig(
            miss_rate=self.world.noise.miss_rate,
            corrupt_rate=self.world.noise.corrupt_rate,
            region_jitter=self.world.noise.region_jitter,
            seed=seed,
        )
        pg_m = interpret(scene, self.world.grammar, noise)
        if greedy is None:
            greedy = mode is Mode.HUMAN or epsilon == 0.0
        session = GameSession(
            id=session_id or f"s-{uuid.uuid4().hex[:12]}",
            scene=scene,
            task=task,
            mode=mode,
            seed=seed,
            pg_m=pg_m,
            belief=init_belief(self.world.grammar),
            catalog=self.catalog_for(task_id),
            turn_budget=min(self.turn_limit, turn_budget or self.turn_limit),
            epsilon=epsilon,
            greedy=greedy,
            rec_state=initial_state(self.params),
            rng=np.random.default_rng(seed),
        )
        session.record(
            "create",
            session=session.id,
            scene=scene_id,
            task=task_id,
            mode=mode.value,
            seed=seed,
            epsilon=epsilon,
            greedy=greedy,
            turn_budget=session.turn_budget,
            grammar_hash=self.world.grammar.hash,
            ablated=self.ablated,
            pg_m=_pg_wire(pg_m),
        )
        with self._registry_lock:
            self.sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> GameSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    # -- phase 1 ---------------------------------------------------------

    def ask(self, session: GameSession, question_id: str) -> Bubble:
        """One dialog turn: fold the question into the belief, let the
        policy pick a bubble, reveal it."""
        if session.phase is not Phase.PHASE1:
            raise WrongPhase(f"ask only in phase 1, session is {session.phase.value}")
        question = session.catalog.by_id(question_id)
        if question is None:
            raise UnknownQuestion(f"no question {question_id!r} in this task's catalog")
        if session.turn >= session.turn_budget:
            raise TurnLimit(f"turn budget {session.turn_budget} exhausted")

        node_regions = {v: session.pg_m.detections[v].region for v in session.pg_m.node_ids}
        session.belief = update_belief(
            session.belief,
            question_id,
            session.history,
            session.task,
            self.tables,
            node_regions=node_regions,
        )

        specs = enumerate_actions(session.pg_m, session.task)
        if not self.ablated:
            # least collaborative effort: don't re-explain what the user
            # model says is already grasped, unless nothing fresh remains
            grasped = {v for v, g in session.belief.grasp.items() if g >= 0.5}
            fresh = [sp for sp in specs if sp.attention not in grasped]
            if fresh:
                specs = fresh
        mask = valid_action_mask(self.world.grammar, specs)
        enc = encode_state(
            session.pg_m,
            session.belief,
            question.subject,
            session.history,
            self.world.grammar,
            include_belief=not self.ablated,
        )
        h2, session.rec_state = policy_step(self.params, enc.vector, session.rec_state)
        dist, _value = heads(self.params, h2, enc.vector, mask)
        action = select_action(dist, session.epsilon, session.rng, greedy=session.greedy)
        spec = action_from_index(self.world.grammar, action)
        bubble = make_bubble(spec, session.history, session.pg_m)

        # probability the behavior policy (epsilon-mixed) assigned the pick
        n_valid = int(mask.sum())
        behavior = (1.0 - session.epsilon) * float(dist[action]) + session.epsilon / n_valid
        session.pending.append(
            PendingStep(
                state_bits=enc.vector.astype(np.uint8),
                action=action,
                behavior_prob=behavior,
                valid_mask=mask,
                turn=session.turn + 1,
            )
        )
        session.history.questions.append(question_id)
        session.history.bubbles.append(bubble)
        session.turn += 1
        if bubble.sigma2 >= STRONG_REVEAL_SIGMA2:
            session.revealed.add(bubble.attention)
        session.record(
            "ask", turn=session.turn, question=question_id, bubble=bubble_wire(bubble)
        )
        return bubble

    def submit_attempt(
        self,
        session: GameSession,
        answer: str,
        cf: int,
        sf: int,
        response_time_ms: int | None = None,
    ) -> tuple[int, float, bool]:
        """Score an answer attempt; returns (ss, reward, transitioned)."""
        if session.phase is not Phase.PHASE1:
            raise WrongPhase(f"attempt only in phase 1, session is {session.phase.value}")
        if session.turn < 1:
            raise NoBubblesYet("ask for at least one bubble before attempting")
        ss = 1 if answer == session.scene.task_label else -1
        fb = FeedbackRecord(ss=ss, cf=cf, sf=sf)
        cost = dialog_cost(session.history)
        r = turn_reward(fb, cost, session.turn)
        session.feedback.append(fb)
        session.attempts += 1
        session.pending[-1].reward = r
        session.succeeded = session.succeeded or ss == 1
        transitioned = ss == 1 or session.turn >= session.turn_budget or session.attempts >= session.turn_budget
        session.record(
            "attempt",
            turn=session.turn,
            answer=answer,
            ss=ss,
            cf=cf,
            sf=sf,
            reward=r,
            cost=cost,
            response_time_ms=response_time_ms,
        )
        if transitioned:
            session.phase = Phase.PHASE2
            session.eval_questions = (
                []
                if session.pg_m.is_empty()
                else generate_eval_questions(session.pg_m, self.world.grammar)
            )
            session.record(
                "phase_transition", to=Phase.PHASE2.value, succeeded=session.succeeded
            )
        return ss, r, transitioned

    def drain_episode(self, session: GameSession) -> list:
        """Convert this session's pending steps into replayable experiences.
        Only meaningful once phase 1 is over."""
        from ..policy import Experience

        steps = session.pending
        out = []
        for k, p in enumerate(steps):
            nxt = steps[k + 1].state_bits if k + 1 < len(steps) else None
            out.append(
                Experience(
                    state=p.state_bits,
                    action=p.action,
                    behavior_prob=p.behavior_prob,
                    reward=p.reward,
                    next_state=nxt,
                    terminal=k + 1 == len(steps),
                    turn=p.turn,
                    valid_mask=p.valid_mask,
                )
            )
        return out

    # -- phase 2 ---------------------------------------------------------

    def phase2_questions(self, session: GameSession) -> list[EvalQuestion]:
        if session.phase is not Phase.PHASE2:
            raise WrongPhase(f"evaluator questions only in phase 2, session is {session.phase.value}")
        return session.eval_questions

    def run_phase2(self, session: GameSession, answers: list[tuple[str, str]]) -> TrustReport:
        """Score the user's predictions and close the session."""
        if session.phase is not Phase.PHASE2:
            raise WrongPhase(f"phase 2 answers only in phase 2, session is {session.phase.value}")
        by_id = {q.id: q for q in session.eval_questions}
        resolved = []
        for qid, choice in answers:
            if qid not in by_id:
                raise UnknownQuestion(f"no evaluator question {qid!r}")
            resolved.append((by_id[qid], choice))
        minu = assemble_minu(resolved, self.world.grammar, game_id=session.id)
        report = trust_report(minu, {session.id: session.pg_m})
        session.report = report
        session.phase = Phase.DONE
        session.record(
            "phase2",
            answers=[[qid, choice] for qid, choice in answers],
            report=report.as_dict(),
        )
        self._persist(session)
        return report

    def submit_satisfaction(self, session: GameSession, survey: SatisfactionSurvey) -> dict:
        record = collect_satisfaction(survey, session.id)
        session.record("satisfaction", **record)
        if session.report is not None:
            session.report.satisfaction.append(record)
        self._persist(session)  # refresh the stored log with the survey
        return record


def _pg_wire(pg: ParseGraph) -> dict:
    nodes = {}
    for nid in pg.sorted_nodes():
        rec = pg.detections.get(nid)
        if rec is None:
            nodes[nid] = None
            continue
        nodes[nid] = {
            "process": rec.process.value,
            "confidence": rec.confidence,
            "correct": rec.correct,
            "supported": [p.value for p in rec.supported],
            "region": _region_wire(rec.region),
        }
    return {
        "nodes": nodes,
        "edges": pg.sorted_edges(),
        "attributes": {v: dict(s) for v, s in sorted(pg.attributes.items())},
    }
