import json

import pytest

from xtom.cli import main

from .conftest import fixture_grammar_text


@pytest.fixture(scope="module")
def assets(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-assets")
    grammar = root / "body.aog"
    grammar.write_text(fixture_grammar_text(), encoding="utf-8")
    scenes = root / "scenes.txt"
    assert main(["gen-scenes", "--grammar", str(grammar), "--count", "4",
                 "--seed", "2", "--output", str(scenes)]) == 0
    out = root / "run0"
    code = main([
        "train", "--grammar", str(grammar), "--scenes", str(scenes),
        "--episodes", "20", "--update-every", "10", "--hidden", "8",
        "--batch-episodes", "4", "--seed", "1", "--output", str(out),
    ])
    assert code == 0
    return {"root": root, "grammar": grammar, "scenes": scenes, "checkpoint": out / "policy.npz"}


class TestGenScenes:
    def test_refuses_overwrite(self, assets):
        code = main(["gen-scenes", "--grammar", str(assets["grammar"]), "--count", "2",
                     "--seed", "2", "--output", str(assets["scenes"])])
        assert code == 1

    def test_force_overwrites(self, assets, tmp_path):
        out = tmp_path / "s.txt"
        out.write_text("old", encoding="utf-8")
        code = main(["gen-scenes", "--grammar", str(assets["grammar"]), "--count", "2",
                     "--seed", "2", "--output", str(out), "--force"])
        assert code == 0
        assert "scene scene-0000" in out.read_text()


class TestTrain:
    def test_outputs_exist(self, assets):
        out = assets["checkpoint"].parent
        assert (out / "policy.npz").exists()
        assert (out / "policy.npz.manifest.txt").exists()
        assert (out / "metrics.jsonl").exists()
        assert (out / "replay_pool.npz").exists()

    def test_replay_pool_file_loads(self, assets):
        from xtom.policy import ReplayPool

        pool = ReplayPool.load(assets["checkpoint"].parent / "replay_pool.npz")
        assert len(pool) == 20  # one episode per training game

    def test_update_round_count(self, assets):
        lines = (assets["checkpoint"].parent / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 2  # 20 episodes / update every 10

    def test_missing_grammar_fails_with_config_error(self, tmp_path, capsys):
        code = main(["train", "--grammar", str(tmp_path / "nope.aog"),
                     "--scenes", str(tmp_path / "nope.txt"), "--output", str(tmp_path / "o")])
        assert code == 1
        assert "CONFIG_ERROR" in capsys.readouterr().err

    def test_data_dir_fallback(self, assets, tmp_path, monkeypatch):
        monkeypatch.setenv("XTOM_DATA_DIR", str(assets["root"]))
        out = tmp_path / "env-run"
        code = main([
            "train", "--grammar", "body.aog", "--scenes", "scenes.txt",
            "--episodes", "0", "--output", str(out),
        ])
        assert code == 0
        assert (out / "policy.npz").exists()


class TestSimulateAndReport:
    def test_simulate_writes_n_transcripts(self, assets, tmp_path):
        out = tmp_path / "transcripts"
        code = main([
            "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint", str(assets["checkpoint"]), "--games", "3", "--seed", "9",
            "--output", str(out),
        ])
        assert code == 0
        assert len(list(out.glob("*.jsonl"))) == 3

    def test_zero_games_makes_empty_dir(self, assets, tmp_path):
        out = tmp_path / "none"
        code = main([
            "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint", str(assets["checkpoint"]), "--games", "0", "--seed", "1",
            "--output", str(out),
        ])
        assert code == 0
        assert out.is_dir() and not list(out.glob("*.jsonl"))

    def test_refuses_nonempty_output(self, assets, tmp_path):
        out = tmp_path / "t"
        args = [
            "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint", str(assets["checkpoint"]), "--games", "1", "--seed", "1",
            "--output", str(out),
        ]
        assert main(args) == 0
        assert main(args) == 1  # refuses without --force
        assert main(args + ["--force"]) == 0

    def test_simulate_byte_identical(self, assets, tmp_path):
        dirs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main([
                "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
                "--checkpoint", str(assets["checkpoint"]), "--games", "2", "--seed", "4",
                "--output", str(out),
            ])
            assert code == 0
            dirs.append(out)
        for p in sorted(dirs[0].glob("*.jsonl")):
            assert p.read_bytes() == (dirs[1] / p.name).read_bytes()

    def test_report(self, assets, tmp_path, capsys):
        transcripts = tmp_path / "transcripts"
        main([
            "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint", str(assets["checkpoint"]), "--games", "4", "--seed", "9",
            "--output", str(transcripts),
        ])
        capsys.readouterr()
        out = tmp_path / "report"
        code = main(["report", "--transcripts", str(transcripts),
                     "--grammar", str(assets["grammar"]), "--output", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        pos = [text.index(w) for w in ("Elaboration", "Sequence", "Recurrence", "Restatement", "Summary")]
        assert pos == sorted(pos)
        doc = json.loads((out / "report.json").read_text())
        assert doc["games"] == 4
        assert set(doc["discourse"]) == {"elaboration", "sequence", "recurrence", "restatement", "summary"}
        assert doc["trust"] is not None

    def test_report_empty_dir(self, assets, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        assert main(["report", "--transcripts", str(empty), "--grammar", str(assets["grammar"])]) == 1

    def test_report_counts_hand_built_distribution(self, assets, tmp_path, capsys):
        # 10 bubbles: 4 sequence, 3 elaboration, 3 recurrence -> 40/30/30
        relations = ["sequence"] * 4 + ["elaboration"] * 3 + ["recurrence"] * 3
        events = [
            {
                "event": "create", "ts": 1, "session": "hand-0", "scene": "s", "task": "action",
                "mode": "simulated", "seed": 0,
                "pg_m": {"nodes": {}, "edges": [], "attributes": {}},
            }
        ]
        for i, rel in enumerate(relations):
            events.append(
                {
                    "event": "ask", "ts": i + 2, "turn": i + 1, "question": "q-head",
                    "bubble": {
                        "attention": "head", "act": "alpha", "sigma1": 1.15, "sigma2": 9.0,
                        "discourse": rel, "content": 5.0,
                        "region": {"cx": 0.5, "cy": 0.5, "r": 0.1},
                    },
                }
            )
        tdir = tmp_path / "hand"
        tdir.mkdir()
        (tdir / "hand-0.jsonl").write_text(
            "\n".join(json.dumps(e) for e in events) + "\n", encoding="utf-8"
        )
        out = tmp_path / "hand-report"
        code = main(["report", "--transcripts", str(tdir),
                     "--grammar", str(assets["grammar"]), "--output", str(out)])
        capsys.readouterr()
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["discourse"]["sequence"] == pytest.approx(0.4)
        assert doc["discourse"]["elaboration"] == pytest.approx(0.3)
        assert doc["discourse"]["recurrence"] == pytest.approx(0.3)
        assert doc["discourse"]["summary"] == 0.0


class TestEstimateLikelihoods:
    def test_writes_tables(self, assets, tmp_path):
        transcripts = tmp_path / "transcripts"
        main([
            "simulate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint", str(assets["checkpoint"]), "--games", "3", "--seed", "2",
            "--output", str(transcripts),
        ])
        out = tmp_path / "tables.json"
        code = main(["estimate-likelihoods", "--transcripts", str(transcripts),
                     "--grammar", str(assets["grammar"]), "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["version"] == 1
        assert doc["games"] == 3


class TestAblateCommand:
    def test_runs_and_writes_json(self, assets, tmp_path, capsys):
        out = tmp_path / "ablation.json"
        code = main([
            "ablate", "--grammar", str(assets["grammar"]), "--scenes", str(assets["scenes"]),
            "--checkpoint-full", str(assets["checkpoint"]),
            "--checkpoint-ablated", str(assets["checkpoint"]),
            "--games", "3", "--seed", "5", "--output", str(out),
        ])
        assert code == 0
        text = capsys.readouterr().out
        assert "#bubbles" in text
        doc = json.loads(out.read_text())
        assert [row["model"] for row in doc["table"]] == ["full", "ablated"]


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, assets, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"count": 7, "seed": 1}), encoding="utf-8")
        out = tmp_path / "scenes.txt"
        code = main(["--config", str(config), "gen-scenes", "--grammar", str(assets["grammar"]),
                     "--seed", "3", "--output", str(out)])
        assert code == 0
        text = out.read_text()
        assert text.count("scene scene-") == 7  # from config
        # explicit --seed 3 wins over config's 1
        other = tmp_path / "scenes-seed1.txt"
        main(["gen-scenes", "--grammar", str(assets["grammar"]), "--count", "7",
              "--seed", "1", "--output", str(other)])
        assert out.read_text() != other.read_text()
