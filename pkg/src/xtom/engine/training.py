"""Episode loops: simulated play, policy training with periodic off-policy
updates, batch simulation for test trials, and the full-vs-ablated
comparison harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..belief import LikelihoodTables
from ..errors import ConfigError, Exhausted
from ..policy import (
    AdamState,
    PolicyConfig,
    PolicyParams,
    ReplayPool,
    action_space_size,
    anneal_epsilon,
    encoding_dim,
    save_checkpoint,
    train_step,
)
from ..simuser import (
    UserProfile,
    answer_eval_question,
    attempt_task,
    next_question,
    rate_satisfaction,
)
from .session import GameEngine, GameSession, Mode, Phase, World
from .transcript import GameTranscript, write_transcript

USER_STREAM_OFFSET = 7919  # keeps the simulated user's draws off the engine's stream
EPISODE_SEED_STRIDE = 100003


@dataclass
class TrainingConfig:
    episodes: int = 3500
    update_every: int = 200
    steps_per_update: int = 8  # gradient steps per update round, each a fresh pool sample
    hidden_size: int = 48
    seed: int = 0
    turn_limit: int = 30
    ablated: bool = False
    policy: dict = field(default_factory=dict)  # PolicyConfig overrides

    def __post_init__(self):
        if self.episodes < 0 or self.update_every <= 0 or self.steps_per_update <= 0:
            raise ConfigError("episodes must be >= 0, update cadence and steps positive")


def episode_seed(base_seed: int, index: int) -> int:
    return base_seed * EPISODE_SEED_STRIDE + index


def play_episode(
    engine: GameEngine,
    session: GameSession,
    profile: UserProfile,
    run_phase2: bool = True,
) -> GameSession:
    """Drive one session with the simulated user until it finishes.

    The user keeps asking while under-evidenced and only attempts the task
    once the revealed critical fraction reaches the profile threshold, or
    when the turn budget forces a guess."""
    rng_user = np.random.default_rng(session.seed + USER_STREAM_OFFSET)
    critical = set(session.task.critical_nodes)

    def evidence_fraction() -> float:
        return len(session.revealed & critical) / max(1, len(critical))

    if session.pg_m.is_empty():
        return session  # the machine saw nothing; there is no dialog to have

    while session.phase is Phase.PHASE1:
        exhausted = False
        under_evidenced = evidence_fraction() < profile.evidence_threshold or session.turn == 0
        if under_evidenced and session.turn < session.turn_budget:
            try:
                qid = next_question(
                    profile, session.catalog, session.revealed, session.history, rng_user
                )
                engine.ask(session, qid)
            except Exhausted:
                exhausted = True
        ready = evidence_fraction() >= profile.evidence_threshold
        out_of_time = session.turn >= session.turn_budget or exhausted
        if (ready or out_of_time) and session.turn >= 1:
            answer, cf = attempt_task(profile, session.task, session.revealed, session.pg_m, rng_user)
            sf = rate_satisfaction(session.history, session.task)
            response_time = int(rng_user.integers(400, 4000))
            engine.submit_attempt(session, answer, cf, sf, response_time_ms=response_time)
    if run_phase2 and session.phase is Phase.PHASE2:
        answers = []
        for q in engine.phase2_questions(session):
            answers.append((q.id, answer_eval_question(profile, q, session.revealed, session.pg_m, rng_user)))
        engine.run_phase2(session, answers)
    return session


def _policy_config(world: World, config: TrainingConfig) -> PolicyConfig:
    base = PolicyConfig(
        input_dim=encoding_dim(world.grammar),
        action_count=action_space_size(world.grammar),
        hidden_size=config.hidden_size,
    )
    return replace(base, **config.policy) if config.policy else base


def run_training(
    world: World,
    profile: UserProfile,
    config: TrainingConfig,
    tables: LikelihoodTables | None = None,
    output_dir: str | Path | None = None,
    progress: bool = False,
) -> tuple[PolicyParams, list[dict], ReplayPool]:
    """Train the explainer against the simulated user.

    Episodes run with the epsilon-greedy schedule; every ``update_every``
    episodes the pool is sampled for one off-policy update. Fully
    deterministic for a fixed config and seed.
    """
    policy_cfg = _policy_config(world, config)
    params = PolicyParams.init(
        policy_cfg.input_dim, policy_cfg.hidden_size, policy_cfg.action_count, seed=config.seed
    )
    opt = AdamState.for_params(params)
    pool = ReplayPool(policy_cfg.pool_capacity)
    train_rng = np.random.default_rng(config.seed + 1)
    scene_ids = sorted(world.scenes)
    if not scene_ids or not world.tasks:
        raise ConfigError("training needs at least one scene and one task")

    metrics_rows: list[dict] = []
    engine = GameEngine(world, params, tables, turn_limit=config.turn_limit, ablated=config.ablated)
    for ep in range(config.episodes):
        eps = anneal_epsilon(ep, config.episodes)
        scene_id = scene_ids[ep % len(scene_ids)]
        session = engine.create_session(
            scene_id=scene_id,
            task_id=world.task_for_scene(world.scenes[scene_id]),
            mode=Mode.SIMULATED,
            seed=episode_seed(config.seed, ep),
            session_id=f"train-{ep:05d}",
            epsilon=eps,
            greedy=False,
            turn_budget=min(config.turn_limit, profile.patience),
        )
        play_episode(engine, session, profile, run_phase2=False)
        episode = engine.drain_episode(session)
        if episode:
            pool.append(episode)
        engine.sessions.pop(session.id, None)

        if (ep + 1) % config.update_every == 0 and len(pool) >= policy_cfg.batch_episodes:
            for _ in range(config.steps_per_update):
                params, metrics = train_step(params, pool, opt, policy_cfg, train_rng, epsilon=eps)
            engine.params = params
            row = {"episode": ep + 1, "steps": config.steps_per_update, **metrics.as_dict()}
            metrics_rows.append(row)
            if progress:
                print(
                    f"  ep {ep + 1:>5}  J={metrics.objective:8.4f}  "
                    f"H={metrics.entropy:6.4f}  eps={eps:.3f}",
                    flush=True,
                )

    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(
            output_dir / "policy.npz",
            params,
            world.grammar.hash,
            policy_cfg,
            extra={"episodes": config.episodes, "seed": config.seed, "ablated": config.ablated},
        )
        with open(output_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
            for row in metrics_rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        pool.save(output_dir / "replay_pool.npz")
    return params, metrics_rows, pool


def simulate_games(
    world: World,
    params: PolicyParams,
    profile: UserProfile,
    n_games: int,
    seed: int,
    tables: LikelihoodTables | None = None,
    turn_limit: int = 30,
    ablated: bool = False,
    output_dir: str | Path | None = None,
    with_phase2: bool = True,
    id_prefix: str = "game",
) -> list[GameTranscript]:
    """Run seeded test games with the greedy policy; optionally persist one
    transcript file per game."""
    engine = GameEngine(world, params, tables, turn_limit=turn_limit, ablated=ablated)
    scene_ids = sorted(world.scenes)
    transcripts = []
    for g in range(n_games):
        scene_id = scene_ids[g % len(scene_ids)]
        session = engine.create_session(
            scene_id=scene_id,
            task_id=world.task_for_scene(world.scenes[scene_id]),
            mode=Mode.SIMULATED,
            seed=episode_seed(seed, g),
            session_id=f"{id_prefix}-{g:05d}",
            epsilon=0.0,
            greedy=True,
            turn_budget=min(turn_limit, profile.patience),
        )
        play_episode(engine, session, profile, run_phase2=with_phase2)
        transcripts.append(GameTranscript(list(session.events)))
        if output_dir is not None:
            write_transcript(session, output_dir)
        engine.sessions.pop(session.id, None)
    return transcripts


def simulate_one_indexed(
    world: World,
    params: PolicyParams,
    profile: UserProfile,
    game_index: int,
    seed: int,
    tables: LikelihoodTables | None = None,
    turn_limit: int = 30,
    ablated: bool = False,
    output_dir: str | Path | None = None,
    id_prefix: str = "game",
) -> GameTranscript:
    """One game of the deterministic slate ``simulate_games`` runs; workers
    call this per index so parallel output matches serial output byte for
    byte."""
    engine = GameEngine(world, params, tables, turn_limit=turn_limit, ablated=ablated)
    scene_ids = sorted(world.scenes)
    scene_id = scene_ids[game_index % len(scene_ids)]
    session = engine.create_session(
        scene_id=scene_id,
        task_id=world.task_for_scene(world.scenes[scene_id]),
        mode=Mode.SIMULATED,
        seed=episode_seed(seed, game_index),
        session_id=f"{id_prefix}-{game_index:05d}",
        epsilon=0.0,
        greedy=True,
        turn_budget=min(turn_limit, profile.patience),
    )
    play_episode(engine, session, profile, run_phase2=True)
    if output_dir is not None:
        write_transcript(session, output_dir)
    return GameTranscript(list(session.events))


@dataclass
class AblationRow:
    model: str
    n_games: int
    ss_rate: float
    mean_bubbles: float
    mean_reward: float


def evaluate_games(transcripts: list[GameTranscript], model: str) -> AblationRow:
    """Table row over finished games: success rate, dialog length, final
    turn reward."""
    n = len(transcripts)
    succ = sum(1 for t in transcripts if t.succeeded())
    bubbles = [len(t.asks()) for t in transcripts]
    rewards = [t.attempts()[-1]["reward"] if t.attempts() else 0.0 for t in transcripts]
    return AblationRow(
        model=model,
        n_games=n,
        ss_rate=succ / n if n else 0.0,
        mean_bubbles=float(np.mean(bubbles)) if bubbles else 0.0,
        mean_reward=float(np.mean(rewards)) if rewards else 0.0,
    )


def run_ablation(
    world: World,
    profile: UserProfile,
    full_params: PolicyParams,
    ablated_params: PolicyParams,
    n_games: int,
    seed: int,
    tables: LikelihoodTables | None = None,
    turn_limit: int = 30,
) -> dict:
    """Evaluate the full and the user-model-ablated policy on an identical
    held-out scene/seed slate. Columns mirror the comparison table: ss,
    #bubbles, r."""
    if full_params.input_dim != ablated_params.input_dim:
        raise ConfigError("full and ablated checkpoints disagree on encoding dims")
    rows = []
    per_game = {}
    for name, params, ablated in (
        ("full", full_params, False),
        ("ablated", ablated_params, True),
    ):
        transcripts = simulate_games(
            world,
            params,
            profile,
            n_games,
            seed,
            tables=tables,
            turn_limit=turn_limit,
            ablated=ablated,
            with_phase2=False,
            id_prefix=f"eval-{name}",
        )
        rows.append(evaluate_games(transcripts, name))
        per_game[name] = {
            "rewards": [t.attempts()[-1]["reward"] if t.attempts() else 0.0 for t in transcripts],
            "bubbles": [len(t.asks()) for t in transcripts],
            "ss": [1 if t.succeeded() else 0 for t in transcripts],
        }
    return {"rows": rows, "per_game": per_game}


def format_ablation_table(rows: list[AblationRow]) -> str:
    lines = [f"{'Model':<12} {'#test trials':>12} {'ss':>8} {'#bubbles':>10} {'r':>10}"]
    for row in rows:
        lines.append(
            f"{row.model:<12} {row.n_games:>12} {row.ss_rate:>7.1%} "
            f"{row.mean_bubbles:>10.2f} {row.mean_reward:>10.4f}"
        )
    return "\n".join(lines) + "\n"
