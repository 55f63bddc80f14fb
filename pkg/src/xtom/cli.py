"""Operator entry points.

Subcommands: train, simulate, ablate, report, serve, gen-scenes,
estimate-likelihoods. Flags are long-form only; a JSON config file can
supply any flag's value but an explicit flag always wins. Paths that do
not resolve relative to the working directory fall back to XTOM_DATA_DIR.
Outputs refuse to overwrite existing files unless --force is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aog import load_grammar
from .belief import LikelihoodTables, estimate_likelihoods
from .engine import (
    TrainingConfig,
    World,
    default_tasks,
    load_transcript_dir,
    run_ablation,
    run_training,
    simulate_games,
    format_ablation_table,
)
from .errors import ConfigError, EmptyDir, XTomError
from .evaluator import format_trust_report, generate_eval_questions, merge_minu, trust_report
from .performer import NoiseConfig, format_scene, generate_scenes, load_scenes
from .policy import load_checkpoint
from .simuser import UserProfile, load_profile

TABLE1_ORDER = ("elaboration", "sequence", "recurrence", "restatement", "summary")
ACT_ORDER = ("alpha", "beta", "gamma")


def resolve_path(value: str | None, must_exist: bool = True) -> Path | None:
    """Look up a path, falling back to $XTOM_DATA_DIR for relative names."""
    if value is None:
        return None
    p = Path(value)
    if p.exists() or not must_exist:
        return p
    root = os.environ.get("XTOM_DATA_DIR")
    if root and not p.is_absolute():
        candidate = Path(root) / value
        if candidate.exists():
            return candidate
    if must_exist:
        raise ConfigError(f"path {value!r} not found (also tried XTOM_DATA_DIR)")
    return p


def _check_output(path: Path, force: bool):
    if path.exists() and not force:
        raise ConfigError(f"refusing to overwrite {path} without --force")


def _load_world(args, noise_seed: int = 0) -> World:
    grammar = load_grammar(resolve_path(args.grammar))
    scenes = {s.id: s for s in load_scenes(resolve_path(args.scenes))}
    noise = NoiseConfig(
        miss_rate=args.miss_rate,
        corrupt_rate=args.corrupt_rate,
        region_jitter=args.region_jitter,
        seed=noise_seed,
    )
    return World(grammar=grammar, scenes=scenes, tasks=default_tasks(grammar), noise=noise)


def _load_profile(args) -> UserProfile:
    if args.profile:
        return load_profile(resolve_path(args.profile))
    return UserProfile()


def _load_tables(args) -> LikelihoodTables | None:
    if getattr(args, "tables", None):
        return LikelihoodTables.load(resolve_path(args.tables))
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    out = Path(args.output)
    _check_output(out / "policy.npz", args.force)
    world = _load_world(args)
    profile = _load_profile(args)
    overrides = {}
    if args.batch_episodes is not None:
        overrides["batch_episodes"] = args.batch_episodes
    config = TrainingConfig(
        episodes=args.episodes,
        update_every=args.update_every,
        hidden_size=args.hidden,
        seed=args.seed,
        turn_limit=args.turn_limit,
        ablated=args.ablated,
        policy=overrides,
    )
    print(f"training {'ablated' if args.ablated else 'full'} policy: "
          f"{config.episodes} episodes, update every {config.update_every}")
    _, metrics, _ = run_training(
        world, profile, config, tables=_load_tables(args), output_dir=out, progress=True
    )
    print(f"wrote checkpoint and {len(metrics)} metric rows to {out}")
    return 0


def cmd_simulate(args) -> int:
    out = Path(args.output)
    if out.exists() and any(out.glob("*.jsonl")) and not args.force:
        raise ConfigError(f"refusing to write into non-empty {out} without --force")
    world = _load_world(args)
    profile = _load_profile(args)
    params, _meta = load_checkpoint(resolve_path(args.checkpoint), world.grammar.hash)
    out.mkdir(parents=True, exist_ok=True)
    if args.workers > 1:
        _simulate_parallel(args, out)
    else:
        simulate_games(
            world,
            params,
            profile,
            n_games=args.games,
            seed=args.seed,
            tables=_load_tables(args),
            turn_limit=args.turn_limit,
            ablated=args.ablated,
            output_dir=out,
        )
    print(f"wrote {args.games} transcripts to {out}")
    return 0


def _simulate_parallel(args, out: Path):
    """Split the game index range over worker processes; per-game seeding
    keeps the output identical to a single-worker run."""
    from concurrent.futures import ProcessPoolExecutor

    ranges = np.array_split(np.arange(args.games), args.workers)
    payload = {
        "grammar": str(resolve_path(args.grammar)),
        "scenes": str(resolve_path(args.scenes)),
        "profile": str(resolve_path(args.profile)) if args.profile else None,
        "checkpoint": str(resolve_path(args.checkpoint)),
        "tables": str(resolve_path(args.tables)) if getattr(args, "tables", None) else None,
        "seed": args.seed,
        "turn_limit": args.turn_limit,
        "ablated": args.ablated,
        "miss_rate": args.miss_rate,
        "corrupt_rate": args.corrupt_rate,
        "region_jitter": args.region_jitter,
        "output": str(out),
    }
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        list(pool.map(_simulate_worker, [(payload, r.tolist()) for r in ranges if len(r)]))


def _simulate_worker(job):
    payload, indices = job
    grammar = load_grammar(payload["grammar"])
    world = World(
        grammar=grammar,
        scenes={s.id: s for s in load_scenes(payload["scenes"])},
        tasks=default_tasks(grammar),
        noise=NoiseConfig(
            miss_rate=payload["miss_rate"],
            corrupt_rate=payload["corrupt_rate"],
            region_jitter=payload["region_jitter"],
        ),
    )
    profile = load_profile(payload["profile"]) if payload["profile"] else UserProfile()
    params, _ = load_checkpoint(payload["checkpoint"], grammar.hash)
    tables = LikelihoodTables.load(payload["tables"]) if payload["tables"] else None
    from .engine.training import simulate_one_indexed

    for g in indices:
        simulate_one_indexed(
            world,
            params,
            profile,
            game_index=int(g),
            seed=payload["seed"],
            tables=tables,
            turn_limit=payload["turn_limit"],
            ablated=payload["ablated"],
            output_dir=payload["output"],
        )


def cmd_ablate(args) -> int:
    world = _load_world(args)
    profile = _load_profile(args)
    full_params, _ = load_checkpoint(resolve_path(args.checkpoint_full), world.grammar.hash)
    ablated_params, _ = load_checkpoint(resolve_path(args.checkpoint_ablated), world.grammar.hash)
    result = run_ablation(
        world,
        profile,
        full_params,
        ablated_params,
        n_games=args.games,
        seed=args.seed,
        tables=_load_tables(args),
        turn_limit=args.turn_limit,
    )
    table = format_ablation_table(result["rows"])
    print(table, end="")
    if args.output:
        out = Path(args.output)
        _check_output(out, args.force)
        out.parent.mkdir(parents=True, exist_ok=True)
        rows = [row.__dict__ for row in result["rows"]]
        out.write_text(
            json.dumps({"table": rows, "per_game": result["per_game"]}, indent=2, sort_keys=True),
            encoding="utf-8",
        )
        print(f"wrote {out}")
    return 0


def discourse_distribution(transcripts) -> dict[str, float]:
    counts = {name: 0 for name in TABLE1_ORDER}
    total = 0
    for t in transcripts:
        for e in t.asks():
            counts[e["bubble"]["discourse"]] += 1
            total += 1
    if total == 0:
        return {name: 0.0 for name in TABLE1_ORDER}
    return {name: counts[name] / total for name in TABLE1_ORDER}


def act_distribution(transcripts) -> dict[str, float]:
    counts = {name: 0 for name in ACT_ORDER}
    total = 0
    for t in transcripts:
        for e in t.asks():
            counts[e["bubble"]["act"]] += 1
            total += 1
    if total == 0:
        return {name: 0.0 for name in ACT_ORDER}
    return {name: counts[name] / total for name in ACT_ORDER}


def rebuild_trust(transcripts, grammar):
    """Recompute the trust metrics from persisted answers and parse graphs."""
    estimates = []
    pgms = {}
    satisfaction = []
    for t in transcripts:
        p2 = t.phase2_event()
        if p2 is None:
            continue
        pg = t.machine_parse_graph(grammar)
        questions = {q.id: q for q in generate_eval_questions(pg, grammar)}
        resolved = []
        for qid, choice in p2["answers"]:
            if qid in questions:
                resolved.append((questions[qid], choice))
        from .evaluator import assemble_minu

        estimates.append(assemble_minu(resolved, grammar, game_id=t.session_id))
        pgms[t.session_id] = pg
        for e in t.events:
            if e["event"] == "satisfaction":
                satisfaction.append(e)
    if not pgms:
        return None
    return trust_report(merge_minu(estimates), pgms, satisfaction)


def cmd_report(args) -> int:
    directory = resolve_path(args.transcripts)
    transcripts = load_transcript_dir(directory)
    if not transcripts:
        raise EmptyDir(f"no transcripts under {directory}")
    grammar = load_grammar(resolve_path(args.grammar))

    discourse = discourse_distribution(transcripts)
    acts = act_distribution(transcripts)
    trust = rebuild_trust(transcripts, grammar)

    lines = [f"games: {len(transcripts)}", ""]
    header = " | ".join(f"{name.capitalize():>12}" for name in TABLE1_ORDER)
    values = " | ".join(f"{discourse[name]:>11.1%}" for name in TABLE1_ORDER)
    lines += ["discourse relations:", header, values, ""]
    lines += ["explanation acts:"]
    for name in ACT_ORDER:
        lines.append(f"  {name:<6} {acts[name]:>7.1%}")
    lines.append("")
    if trust is not None:
        lines.append("trust metrics:")
        lines.append(format_trust_report(trust))
    text = "\n".join(lines)
    print(text)

    if args.output:
        out = Path(args.output)
        _check_output(out, args.force)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text + "\n", encoding="utf-8")
        doc = {
            "games": len(transcripts),
            "discourse": discourse,
            "acts": acts,
            "trust": trust.as_dict() if trust else None,
        }
        (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
        print(f"wrote {out}/report.txt and report.json")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .engine.service import create_app
    from .engine.session import GameEngine

    world = _load_world(args)
    params, _meta = load_checkpoint(resolve_path(args.checkpoint), world.grammar.hash)
    engine = GameEngine(
        world,
        params,
        tables=_load_tables(args),
        turn_limit=args.turn_limit,
        transcript_dir=args.transcript_dir,
    )
    app = create_app(engine, token=args.token, ui_dir=args.ui_dir)
    if not (0 < args.port < 65536):
        from .errors import BindError

        raise BindError(f"port {args.port} out of range")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        from .errors import BindError

        raise BindError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    return 0


def cmd_gen_scenes(args) -> int:
    grammar = load_grammar(resolve_path(args.grammar))
    out = Path(args.output)
    _check_output(out, args.force)
    scenes = generate_scenes(grammar, args.count, args.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(format_scene(s) for s in scenes), encoding="utf-8")
    print(f"wrote {len(scenes)} scenes to {out}")
    return 0


def cmd_estimate_likelihoods(args) -> int:
    directory = resolve_path(args.transcripts)
    transcripts = load_transcript_dir(directory)
    if not transcripts:
        raise EmptyDir(f"no transcripts under {directory}")
    grammar = load_grammar(resolve_path(args.grammar))
    tasks = default_tasks(grammar)
    views = []
    for t in transcripts:
        task = tasks.get(t.header["task"])
        critical = task.critical_nodes if task else ()
        views.append(t.view(grammar, critical))
    tables = estimate_likelihoods(views)
    out = Path(args.output)
    _check_output(out, args.force)
    out.parent.mkdir(parents=True, exist_ok=True)
    tables.save(out)
    print(f"estimated likelihoods from {len(views)} games -> {out}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def _add_world_flags(p: argparse.ArgumentParser):
    p.add_argument("--grammar", help="grammar file")
    p.add_argument("--scenes", help="scenes file")
    p.add_argument("--profile", help="simulated user profile file")
    p.add_argument("--tables", help="likelihood tables file")
    p.add_argument("--miss-rate", type=float)
    p.add_argument("--corrupt-rate", type=float)
    p.add_argument("--region-jitter", type=float)
    p.add_argument("--turn-limit", type=int)
    p.add_argument("--seed", type=int)


_DEFAULTS = {
    "miss_rate": 0.15,
    "corrupt_rate": 0.1,
    "region_jitter": 0.01,
    "turn_limit": 30,
    "seed": 0,
    "episodes": 3500,
    "update_every": 200,
    "hidden": 48,
    "games": 500,
    "workers": 1,
    "count": 20,
    "host": "127.0.0.1",
    "port": 8000,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xtom", description=__doc__)
    parser.add_argument("--version", action="version", version=f"xtom {__version__}")
    parser.add_argument("--config", help="JSON file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the explainer policy in simulation")
    _add_world_flags(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--update-every", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--batch-episodes", type=int, help="episodes sampled per update")
    p.add_argument("--ablated", action="store_true", help="zero the user-model features")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run seeded test games with a checkpoint")
    _add_world_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--games", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--ablated", action="store_true")
    p.add_argument("--output", required=True, help="transcript directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ablate", help="compare full and ablated checkpoints")
    _add_world_flags(p)
    p.add_argument("--checkpoint-full", required=True)
    p.add_argument("--checkpoint-ablated", required=True)
    p.add_argument("--games", type=int)
    p.add_argument("--output", help="JSON results file")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="aggregate transcripts into the analytics tables")
    p.add_argument("--transcripts", required=True, help="transcript directory")
    p.add_argument("--grammar", required=True)
    p.add_argument("--output", help="report directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the HTTP API (and optionally the UI bundle)")
    _add_world_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--token", help="require this bearer token")
    p.add_argument("--ui-dir", help="static UI bundle to serve at /")
    p.add_argument("--transcript-dir", help="persist finished sessions here")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gen-scenes", help="emit randomized fixture scenes")
    p.add_argument("--grammar", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_scenes)

    p = sub.add_parser("estimate-likelihoods", help="frequency tables from transcripts")
    p.add_argument("--transcripts", required=True)
    p.add_argument("--grammar", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_estimate_likelihoods)

    return parser


def _apply_config(args: argparse.Namespace):
    """Fill unset flags from --config, then from hard defaults."""
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise ConfigError("--config must hold a JSON object")
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in _DEFAULTS:
                setattr(args, key, _DEFAULTS[key])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except XTomError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
