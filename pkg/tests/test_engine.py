import json
import math
import time

import pytest

from xtom.bubble import Discourse, classify_discourse, content, dialog_cost, BubbleSpec, DialogHistory
from xtom.engine import (
    GameEngine,
    GameTranscript,
    Mode,
    Phase,
    TrainingConfig,
    World,
    default_tasks,
    dump_transcript,
    load_transcript,
    play_episode,
    replay_transcript,
    run_ablation,
    run_training,
    simulate_games,
    format_ablation_table,
)
from xtom.engine.training import episode_seed, simulate_one_indexed
from xtom.errors import (
    NoBubblesYet,
    TurnLimit,
    UnknownQuestion,
    UnknownScene,
    UnknownTask,
    WrongPhase,
)
from xtom.policy import PolicyParams, action_space_size, encoding_dim


@pytest.fixture()
def engine(world):
    params = PolicyParams.init(
        encoding_dim(world.grammar), 16, action_space_size(world.grammar), scale=0.05, seed=0
    )
    return GameEngine(world, params, turn_limit=12)


def scene_id(world):
    return sorted(world.scenes)[0]


class TestCreate:
    def test_fresh_session(self, engine, world):
        s = engine.create_session(scene_id(world), "action", Mode.SIMULATED, seed=4)
        assert s.phase is Phase.PHASE1
        assert s.turn == 0
        assert not s.pg_m.is_empty()

    def test_unknown_scene(self, engine):
        with pytest.raises(UnknownScene):
            engine.create_session("nope", "action")

    def test_unknown_task(self, engine, world):
        with pytest.raises(UnknownTask):
            engine.create_session(scene_id(world), "nope")

    def test_same_seed_same_parse_graph(self, engine, world):
        a = engine.create_session(scene_id(world), "action", seed=9)
        b = engine.create_session(scene_id(world), "action", seed=9)
        assert a.pg_m.node_ids == b.pg_m.node_ids
        assert a.pg_m.detections == b.pg_m.detections


class TestAsk:
    def test_first_bubble_is_sequence(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        bubble = engine.ask(s, s.catalog.questions[0].id)
        assert bubble.discourse is Discourse.SEQUENCE
        assert s.turn == 1
        assert len(s.history.bubbles) == 1

    def test_unknown_question(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        with pytest.raises(UnknownQuestion):
            engine.ask(s, "q-bogus")

    def test_greedy_repeat_is_recurrence(self, world):
        # without the user model there is no freshness mask, and zero params
        # make greedy argmax pick the same action every turn
        params = PolicyParams.init(
            encoding_dim(world.grammar), 16, action_space_size(world.grammar), scale=0.0
        )
        engine = GameEngine(world, params, turn_limit=12, ablated=True)
        s = engine.create_session(scene_id(world), "action", seed=4, greedy=True)
        q = s.catalog.questions[0].id
        first = engine.ask(s, q)
        second = engine.ask(s, q)
        assert first.signature() == second.signature()
        assert second.discourse is Discourse.RECURRENCE

    def test_full_model_masks_grasped_attentions(self, engine, world):
        # any bubble floors its attention's grasp past the mask threshold,
        # so the full model never shows the same node twice in a row
        s = engine.create_session(scene_id(world), "action", seed=4, greedy=True)
        q = s.catalog.questions[0].id
        first = engine.ask(s, q)
        second = engine.ask(s, q)
        assert second.attention != first.attention

    def test_turn_limit(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4, turn_budget=2)
        q = s.catalog.questions[0].id
        engine.ask(s, q)
        engine.ask(s, q)
        with pytest.raises(TurnLimit):
            engine.ask(s, q)

    def test_wrong_phase_after_transition(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        engine.ask(s, s.catalog.questions[0].id)
        engine.submit_attempt(s, s.scene.task_label, 3, 3)
        assert s.phase is Phase.PHASE2
        with pytest.raises(WrongPhase):
            engine.ask(s, s.catalog.questions[0].id)

    def test_bubble_fields_equal_recomputation(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        for q in [q.id for q in s.catalog.questions[:4]]:
            engine.ask(s, q)
        for k, b in enumerate(s.history.bubbles):
            prefix = DialogHistory(bubbles=s.history.bubbles[:k])
            spec = BubbleSpec(b.attention, b.act, b.sigma1, b.sigma2)
            assert b.content == content(b.sigma1, b.sigma2)
            assert b.discourse is classify_discourse(spec, prefix)


class TestAttempt:
    def test_success_transitions(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        engine.ask(s, s.catalog.questions[0].id)
        ss, r, done = engine.submit_attempt(s, s.scene.task_label, 4, 4)
        assert ss == 1 and done and s.phase is Phase.PHASE2
        assert r > 0

    def test_failure_stays_phase1(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        engine.ask(s, s.catalog.questions[0].id)
        wrong = next(l for l in s.task.labels if l != s.scene.task_label)
        ss, r, done = engine.submit_attempt(s, wrong, 2, 2)
        assert ss == -1 and not done and s.phase is Phase.PHASE1

    def test_reward_matches_hand_computation(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        engine.ask(s, s.catalog.questions[0].id)
        cost = dialog_cost(s.history)
        ss, r, _ = engine.submit_attempt(s, s.scene.task_label, 5, 5)
        expected = math.exp(min(10.0, 1.0 / cost)) / 1
        assert r == pytest.approx(expected, abs=1e-12)

    def test_no_bubbles_yet(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        with pytest.raises(NoBubblesYet):
            engine.submit_attempt(s, "walking", 3, 3)

    def test_attempt_after_phase2_rejected(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        engine.ask(s, s.catalog.questions[0].id)
        engine.submit_attempt(s, s.scene.task_label, 3, 3)
        with pytest.raises(WrongPhase):
            engine.submit_attempt(s, s.scene.task_label, 3, 3)


class TestPhase2:
    def _to_phase2(self, engine, world, seed=4):
        s = engine.create_session(scene_id(world), "action", seed=seed)
        engine.ask(s, s.catalog.questions[0].id)
        engine.submit_attempt(s, s.scene.task_label, 4, 4)
        return s

    def test_perfect_answers_unit_reliance_sum(self, engine, world):
        s = self._to_phase2(engine, world)
        answers = []
        for q in engine.phase2_questions(s):
            if q.kind == "detect_success":
                truth = s.pg_m.detections[q.subject].correct
                answers.append((q.id, "yes" if truth else "no"))
        report = engine.run_phase2(s, answers)
        assert s.phase is Phase.DONE
        assert report.reliance == pytest.approx(1.0)

    def test_empty_answers_zero_metrics(self, engine, world):
        s = self._to_phase2(engine, world)
        report = engine.run_phase2(s, [])
        assert report.jpt == 0.0 and report.jnt == 0.0 and report.reliance == 0.0

    def test_questions_wrong_phase(self, engine, world):
        s = engine.create_session(scene_id(world), "action", seed=4)
        with pytest.raises(WrongPhase):
            engine.phase2_questions(s)


class TestEpisodeLoop:
    def test_simulated_episode_reaches_done(self, engine, world, profile):
        s = engine.create_session(
            scene_id(world), "action", Mode.SIMULATED, seed=5, epsilon=0.3, greedy=False
        )
        play_episode(engine, s, profile)
        assert s.phase is Phase.DONE
        assert s.report is not None
        assert len(s.pending) == s.turn

    def test_transcript_replay_reproduces_state(self, engine, world, profile):
        s = engine.create_session(
            scene_id(world), "action", Mode.SIMULATED, seed=6, epsilon=0.4, greedy=False,
            session_id="replay-src",
        )
        play_episode(engine, s, profile)
        transcript = GameTranscript(list(s.events))
        # a fresh engine over the same assets and parameters, not the live one
        fresh = GameEngine(engine.world, engine.params, turn_limit=engine.turn_limit)
        replayed = replay_transcript(fresh, transcript)
        assert replayed.phase is s.phase
        assert [b.signature() for b in replayed.history.bubbles] == [
            b.signature() for b in s.history.bubbles
        ]
        assert [f.ss for f in replayed.feedback] == [f.ss for f in s.feedback]
        assert replayed.report.as_dict() == s.report.as_dict()

    def test_turn_counter_equals_bubbles(self, engine, world, profile):
        s = engine.create_session(scene_id(world), "action", Mode.SIMULATED, seed=7)
        play_episode(engine, s, profile)
        assert s.turn == len(s.history.bubbles)

    def test_blind_machine_abandons_gracefully(self, world, profile):
        blind = World(
            grammar=world.grammar,
            scenes=world.scenes,
            tasks=world.tasks,
            noise=type(world.noise)(miss_rate=1.0),
        )
        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.0
        )
        engine = GameEngine(blind, params)
        s = engine.create_session(scene_id(world), "action", Mode.SIMULATED, seed=1)
        assert s.pg_m.is_empty()
        play_episode(engine, s, profile)
        assert s.turn == 0 and s.phase is Phase.PHASE1
        assert engine.drain_episode(s) == []


class TestTrainingLoop:
    def _world(self, world):
        return world

    def test_zero_budget_checkpoint_only(self, world, profile, tmp_path):
        config = TrainingConfig(episodes=0, update_every=200, hidden_size=8, seed=1)
        params, metrics, pool = run_training(world, profile, config, output_dir=tmp_path)
        assert (tmp_path / "policy.npz").exists()
        assert metrics == []
        assert len(pool) == 0

    def test_update_round_count(self, world, profile, tmp_path):
        config = TrainingConfig(
            episodes=40, update_every=10, hidden_size=8, seed=1,
            policy={"batch_episodes": 4},
        )
        params, metrics, _ = run_training(world, profile, config, output_dir=tmp_path)
        assert len(metrics) == 4
        lines = (tmp_path / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 4
        assert json.loads(lines[0])["episode"] == 10

    def test_training_deterministic(self, world, profile, tmp_path):
        config = TrainingConfig(
            episodes=20, update_every=10, hidden_size=8, seed=2,
            policy={"batch_episodes": 4},
        )
        out = []
        for run in range(2):
            d = tmp_path / f"run{run}"
            run_training(world, profile, config, output_dir=d)
            out.append((d / "metrics.jsonl").read_bytes())
        assert out[0] == out[1]

    def test_simulate_games_deterministic_bytes(self, world, profile, tmp_path):
        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.05, seed=0
        )
        dirs = []
        for run in range(2):
            d = tmp_path / f"sim{run}"
            simulate_games(world, params, profile, n_games=3, seed=5, output_dir=d)
            dirs.append(d)
        for name in ("game-00000.jsonl", "game-00001.jsonl", "game-00002.jsonl"):
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()

    def test_simulate_one_indexed_matches_batch(self, world, profile, tmp_path):
        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.05, seed=0
        )
        batch_dir = tmp_path / "batch"
        simulate_games(world, params, profile, n_games=3, seed=5, output_dir=batch_dir)
        single_dir = tmp_path / "single"
        for g in range(3):
            simulate_one_indexed(world, params, profile, game_index=g, seed=5, output_dir=single_dir)
        for g in range(3):
            name = f"game-{g:05d}.jsonl"
            assert (batch_dir / name).read_bytes() == (single_dir / name).read_bytes()


class TestLikelihoodLoop:
    def test_estimated_tables_drive_belief_updates(self, world, profile, tmp_path):
        """Full loop: play games, estimate likelihoods from the transcripts,
        then verify a fresh engine's belief updates respond to questions."""
        from xtom.belief import estimate_likelihoods
        from xtom.engine import default_tasks as _tasks

        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.05, seed=0
        )
        transcripts = simulate_games(world, params, profile, n_games=8, seed=77)
        views = [
            t.view(world.grammar, world.tasks[t.header["task"]].critical_nodes)
            for t in transcripts
        ]
        tables = estimate_likelihoods(views)
        assert tables.games == 8

        engine = GameEngine(world, params, tables=tables)
        s = engine.create_session(scene_id(world), "action", Mode.SIMULATED, seed=5)
        qid = s.catalog.questions[0].id
        engine.ask(s, qid)
        # some node's grasp moved off the all-zero start through the
        # question likelihood or the reveal floor
        assert any(v > 0 for v in s.belief.grasp.values())


class TestAblationHarness:
    def test_same_checkpoint_identical_rows(self, world, profile):
        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.05, seed=0
        )
        result = run_ablation(world, profile, params, params, n_games=4, seed=3)
        full_row, ablated_row = result["rows"]
        # identical params still differ via the ablated encoding, so compare
        # the full model against itself instead
        again = run_ablation(world, profile, params, params, n_games=4, seed=3)
        assert again["rows"][0] == full_row
        assert again["rows"][1] == ablated_row

    def test_table_column_order(self, world, profile):
        params = PolicyParams.init(
            encoding_dim(world.grammar), 8, action_space_size(world.grammar), scale=0.05, seed=0
        )
        result = run_ablation(world, profile, params, params, n_games=2, seed=3)
        table = format_ablation_table(result["rows"])
        tokens = table.splitlines()[0].split()
        assert tokens.index("ss") < tokens.index("#bubbles") < tokens.index("r")


def test_episode_throughput(world, profile):
    """Keep an eye on per-episode cost; the acceptance budget depends on it."""
    params = PolicyParams.init(
        encoding_dim(world.grammar), 48, action_space_size(world.grammar), scale=0.05, seed=0
    )
    engine = GameEngine(world, params, turn_limit=20)
    start = time.perf_counter()
    n = 20
    for ep in range(n):
        s = engine.create_session(
            sorted(world.scenes)[ep % len(world.scenes)], "action",
            Mode.SIMULATED, seed=episode_seed(3, ep), epsilon=0.5, greedy=False,
            session_id=f"perf-{ep}",
        )
        play_episode(engine, s, profile, run_phase2=False)
        engine.sessions.pop(s.id, None)
    per_episode = (time.perf_counter() - start) / n
    assert per_episode < 0.25, f"episode too slow: {per_episode:.3f}s"
