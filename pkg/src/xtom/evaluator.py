"""Phase-2 instrument: prediction questions, reconstruction of the user's
model of the machine, and the trust metrics.

Justified positive trust measures how much of the machine's actually
correct output the user predicted it would get right; justified negative
trust, how much of its failure set the user called out; reliance, the
fraction of the machine's parse graph the user predicted with the right
polarity under the right inference process.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .aog import (
    AogGrammar,
    NodeKind,
    ParseGraph,
    Process,
    PROCESSES,
    pg_intersect,
    pg_size,
    signed_partition,
)
from .errors import ConflictingAnswer, EmptyParseGraph, NoGames, RangeError

ES_DIMENSIONS = (
    "usefulness",
    "sufficiency",
    "detail",
    "confidence",
    "understandability",
    "accuracy",
    "consistency",
)


@dataclass(frozen=True)
class EvalQuestion:
    id: str
    kind: str  # detect_success | influence
    subject: str
    process: Process
    choices: tuple[str, ...]
    text: str = ""


@dataclass
class MinUEstimate:
    """Per (game, process): the nodes the user predicts the machine gets
    right (positive) and the ones it predicts the machine fails (negative).
    The two sides are node-disjoint per process."""

    games: dict[str, dict[Process, tuple[ParseGraph, ParseGraph]]] = field(default_factory=dict)

    def get(self, game: str, z: Process, grammar: AogGrammar) -> tuple[ParseGraph, ParseGraph]:
        empty = ParseGraph.empty(grammar)
        return self.games.get(game, {}).get(z, (empty, empty))


@dataclass(frozen=True)
class SatisfactionSurvey:
    """Explanation-satisfaction ratings, 0..9 Likert each."""

    ratings: dict[str, int]

    def __post_init__(self):
        for dim in ES_DIMENSIONS:
            if dim not in self.ratings:
                raise RangeError(f"missing satisfaction dimension {dim!r}")
            v = self.ratings[dim]
            if not isinstance(v, int) or not (0 <= v <= 9):
                raise RangeError(f"{dim} rating {v!r} outside 0..9")


@dataclass
class TrustReport:
    jpt: float
    jnt: float
    reliance: float
    per_process: dict[str, dict[str, float]]
    n_games: int
    satisfaction: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "jpt": self.jpt,
            "jnt": self.jnt,
            "reliance": self.reliance,
            "per_process": self.per_process,
            "n_games": self.n_games,
            "satisfaction": self.satisfaction,
        }


def generate_eval_questions(pg_m: ParseGraph, grammar: AogGrammar) -> list[EvalQuestion]:
    """One success-prediction question per detected node, plus an influence
    question per composite asking which child drove the bottom-up binding or
    which parent the top-down context came from."""
    if pg_m.is_empty():
        raise EmptyParseGraph("no detections to ask about")
    questions: list[EvalQuestion] = []
    for nid in pg_m.sorted_nodes():
        rec = pg_m.detections.get(nid)
        if rec is None:
            continue
        label = grammar.nodes[nid].label
        questions.append(
            EvalQuestion(
                id=f"detect-{nid}",
                kind="detect_success",
                subject=nid,
                process=rec.process,
                choices=("yes", "no"),
                text=f"would the machine detect the {label} ({rec.process.value} route)?",
            )
        )
    for nid in pg_m.sorted_nodes():
        rec = pg_m.detections.get(nid)
        if rec is None or grammar.nodes[nid].kind is NodeKind.TERMINAL:
            continue
        if rec.process is Process.BETA:
            choices = tuple(c for c in sorted(grammar.children[nid]) if c in pg_m.node_ids)
            prompt = "which part most drove the machine to infer the"
        elif rec.process is Process.GAMMA:
            choices = tuple(p for p in sorted(grammar.parents[nid]) if p in pg_m.node_ids)
            prompt = "which surrounding part let the machine infer the"
        else:
            continue
        if not choices:
            continue
        questions.append(
            EvalQuestion(
                id=f"influence-{nid}",
                kind="influence",
                subject=nid,
                process=rec.process,
                choices=choices,
                text=f"{prompt} {grammar.nodes[nid].label}?",
            )
        )
    return questions


def assemble_minu(
    answers: list[tuple[EvalQuestion, str]],
    grammar: AogGrammar,
    game_id: str = "game-0",
) -> MinUEstimate:
    """Route answers into the per-process positive/negative prediction
    graphs. Influence answers contribute the named edge (and its endpoints)
    to the side the subject landed on."""
    pos_nodes: dict[Process, set[str]] = {z: set() for z in PROCESSES}
    neg_nodes: dict[Process, set[str]] = {z: set() for z in PROCESSES}
    influence: dict[Process, list[tuple[str, str]]] = {z: [] for z in PROCESSES}

    for question, choice in answers:
        z = question.process
        if question.kind == "detect_success":
            if choice not in ("yes", "no"):
                raise ConflictingAnswer(f"{question.id}: choice must be yes/no, got {choice!r}")
            side, other = (pos_nodes, neg_nodes) if choice == "yes" else (neg_nodes, pos_nodes)
            if question.subject in other[z]:
                raise ConflictingAnswer(
                    f"node {question.subject!r} answered both ways for {z.value}"
                )
            side[z].add(question.subject)
        elif question.kind == "influence":
            if choice not in question.choices:
                raise ConflictingAnswer(f"{question.id}: {choice!r} not among the choices")
            influence[z].append((question.subject, choice))
        else:
            raise ConflictingAnswer(f"unknown question kind {question.kind!r}")

    games: dict[Process, tuple[ParseGraph, ParseGraph]] = {}
    for z in PROCESSES:
        pos, neg = pos_nodes[z], neg_nodes[z]
        edges: dict[int, set[str]] = {0: set(), 1: set()}  # 0 = positive side
        for subject, influencer in influence[z]:
            side, others, side_idx = (neg, pos, 1) if subject in neg else (pos, neg, 0)
            side.add(subject)
            if influencer in others:
                continue  # influencer already pinned to the opposite polarity
            side.add(influencer)
            for eid, e in grammar.edges.items():
                if {e.parent, e.child} == {subject, influencer}:
                    edges[side_idx].add(eid)
        overlap = pos & neg
        if overlap:
            raise ConflictingAnswer(f"nodes on both sides for {z.value}: {sorted(overlap)}")
        games[z] = (
            ParseGraph.build(grammar, pos, edges[0]),
            ParseGraph.build(grammar, neg, edges[1]),
        )
    est = MinUEstimate()
    est.games[game_id] = games
    return est


def merge_minu(estimates: list[MinUEstimate]) -> MinUEstimate:
    merged = MinUEstimate()
    for est in estimates:
        for game, by_z in est.games.items():
            if game in merged.games:
                raise ConflictingAnswer(f"duplicate game id {game!r} in merged estimate")
            merged.games[game] = by_z
    return merged


def _per_game_sum(minu: MinUEstimate, pgms: dict[str, ParseGraph], delta) -> tuple[float, dict]:
    if not pgms:
        raise NoGames("no games to evaluate")
    total = 0.0
    by_z = {z.value: {"sum": 0.0, "terms": 0} for z in PROCESSES}
    for game in sorted(pgms):
        pg = pgms[game]
        for z in PROCESSES:
            d = delta(game, z, pg)
            if d is None:
                continue
            total += d
            by_z[z.value]["sum"] += d
            by_z[z.value]["terms"] += 1
    n = len(pgms)
    breakdown = {
        z: {"mean": (v["sum"] / n), "terms": v["terms"]} for z, v in by_z.items()
    }
    return total / n, breakdown


def _jpt_delta(minu: MinUEstimate):
    def delta(game, z, pg):
        pos, _ = signed_partition(pg)
        if pg_size(pos) == 0:
            return None
        user_pos, _ = minu.get(game, z, pg.grammar)
        return pg_size(pg_intersect(user_pos, pos)) / pg_size(pos)

    return delta


def _jnt_delta(minu: MinUEstimate):
    def delta(game, z, pg):
        _, neg = signed_partition(pg)
        if pg_size(neg) == 0:
            return None
        _, user_neg = minu.get(game, z, pg.grammar)
        return pg_size(pg_intersect(user_neg, neg)) / pg_size(neg)

    return delta


def _rc_delta(minu: MinUEstimate):
    def delta(game, z, pg):
        if not pg.node_ids:
            return None
        z_pos = {
            v for v in pg.node_ids if pg.detections[v].process is z and pg.detections[v].correct
        }
        z_neg = {
            v for v in pg.node_ids if pg.detections[v].process is z and not pg.detections[v].correct
        }
        user_pos, user_neg = minu.get(game, z, pg.grammar)
        hit = len(user_pos.node_ids & z_pos) + len(user_neg.node_ids & z_neg)
        return hit / len(pg.node_ids)

    return delta


def jpt(minu: MinUEstimate, pgms: dict[str, ParseGraph]) -> float:
    """Justified positive trust: overlap of the user's positive predictions
    with the machine's correct set, per game and process. Terms whose
    denominator graph is empty are skipped (a game with no correct
    detections cannot test positive trust), but such games still count
    toward the average."""
    value, _ = _per_game_sum(minu, pgms, _jpt_delta(minu))
    return value


def jnt(minu: MinUEstimate, pgms: dict[str, ParseGraph]) -> float:
    """Justified negative trust: overlap of the user's failure predictions
    with the machine's actually incorrect set."""
    value, _ = _per_game_sum(minu, pgms, _jnt_delta(minu))
    return value


def reliance(minu: MinUEstimate, pgms: dict[str, ParseGraph]) -> float:
    """Reliance: the fraction of the machine's detected nodes the user
    predicted under the right process with the right polarity. Computed
    over node sets; a perfect predictor's per-game process sum is one."""
    value, _ = _per_game_sum(minu, pgms, _rc_delta(minu))
    return value


def trust_report(
    minu: MinUEstimate,
    pgms: dict[str, ParseGraph],
    satisfaction: list[dict] | None = None,
) -> TrustReport:
    jpt_value, jpt_bd = _per_game_sum(minu, pgms, _jpt_delta(minu))
    jnt_value, jnt_bd = _per_game_sum(minu, pgms, _jnt_delta(minu))
    rc_value, rc_bd = _per_game_sum(minu, pgms, _rc_delta(minu))
    per_process = {
        z.value: {
            "jpt": jpt_bd[z.value]["mean"],
            "jnt": jnt_bd[z.value]["mean"],
            "reliance": rc_bd[z.value]["mean"],
        }
        for z in PROCESSES
    }
    return TrustReport(
        jpt=jpt_value,
        jnt=jnt_value,
        reliance=rc_value,
        per_process=per_process,
        n_games=len(pgms),
        satisfaction=list(satisfaction or []),
    )


def collect_satisfaction(survey: SatisfactionSurvey, session_id: str) -> dict:
    """Validate and freeze one survey as a storable record."""
    return {"session": session_id, **{d: survey.ratings[d] for d in ES_DIMENSIONS}}


def format_trust_report(report: TrustReport) -> str:
    """Tabular text export with per-process breakdowns."""
    lines = [
        f"games: {report.n_games}",
        "",
        f"{'metric':<10} {'total':>8} {'alpha':>8} {'beta':>8} {'gamma':>8}",
    ]
    for name, total in (("JPT", report.jpt), ("JNT", report.jnt), ("Reliance", report.reliance)):
        key = {"JPT": "jpt", "JNT": "jnt", "Reliance": "reliance"}[name]
        row = [f"{name:<10} {total:>8.4f}"]
        for z in ("alpha", "beta", "gamma"):
            row.append(f"{report.per_process[z][key]:>8.4f}")
        lines.append(" ".join(row))
    if report.satisfaction:
        lines.append("")
        lines.append("satisfaction means (0-9):")
        for dim in ES_DIMENSIONS:
            vals = [r[dim] for r in report.satisfaction if dim in r]
            if vals:
                lines.append(f"  {dim:<18} {sum(vals) / len(vals):.2f}")
    return "\n".join(lines) + "\n"
