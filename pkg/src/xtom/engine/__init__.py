from .session import (
    GameEngine,
    GameSession,
    Mode,
    Phase,
    World,
    bubble_wire,
    default_tasks,
)
from .training import (
    AblationRow,
    TrainingConfig,
    evaluate_games,
    format_ablation_table,
    play_episode,
    run_ablation,
    run_training,
    simulate_games,
)
from .transcript import (
    GameTranscript,
    dump_transcript,
    load_transcript,
    load_transcript_dir,
    pg_from_wire,
    replay_transcript,
    write_transcript,
)

__all__ = [
    "AblationRow",
    "GameEngine",
    "GameSession",
    "GameTranscript",
    "Mode",
    "Phase",
    "TrainingConfig",
    "World",
    "bubble_wire",
    "default_tasks",
    "dump_transcript",
    "evaluate_games",
    "format_ablation_table",
    "load_transcript",
    "load_transcript_dir",
    "pg_from_wire",
    "play_episode",
    "replay_transcript",
    "run_ablation",
    "run_training",
    "simulate_games",
    "write_transcript",
]
