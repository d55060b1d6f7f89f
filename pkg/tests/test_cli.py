"""CLI tests: subcommands, exit codes, config layering, replay verification."""

import json

from sls.cli import run


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestBaseline:
    def test_deterministic_reports(self, tmp_path):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert run(["baseline", "--episodes", "3", "--seed", "3", "--out", str(out_a)]) == 0
        assert run(["baseline", "--episodes", "3", "--seed", "3", "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        report = read_json(out_a)
        assert report["variant"] == "random"
        assert report["episodes"] == 3
        assert set(report["reward"]) == {"mean", "stdev", "min", "max"}


class TestTrain:
    def test_single_episode_writes_metrics(self, tmp_path):
        out = tmp_path / "run"
        code = run(["train", "--episodes", "1", "--seed", "2", "--out", str(out)])
        assert code == 0
        lines = (out / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 1
        assert (out / "checkpoint_final.qnet").exists()

    def test_config_file_with_flag_override(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"episodes": 3, "seed": 4}))
        out = tmp_path / "run"
        code = run([
            "train", "--config", str(config_path), "--episodes", "1",
            "--out", str(out),
        ])
        assert code == 0
        assert len((out / "metrics.jsonl").read_text().splitlines()) == 1

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"episodes": 1, "warp_drive": True}))
        assert run(["train", "--config", str(config_path)]) == 1

    def test_eval_round_trip(self, tmp_path):
        out = tmp_path / "run"
        run(["train", "--episodes", "1", "--seed", "2", "--out", str(out)])
        report_path = tmp_path / "eval.json"
        code = run([
            "eval", "--checkpoint", str(out / "checkpoint_final.qnet"),
            "--episodes", "2", "--seed", "1", "--out", str(report_path),
        ])
        assert code == 0
        assert read_json(report_path)["variant"] == "dqn"

    def test_eval_missing_checkpoint_is_runtime_error(self, tmp_path):
        code = run([
            "eval", "--checkpoint", str(tmp_path / "nope.qnet"), "--episodes", "1",
        ])
        assert code == 2

    def test_resumable_checkpoints_continue_a_run(self, tmp_path):
        half = tmp_path / "half"
        assert run([
            "train", "--episodes", "2", "--seed", "9", "--out", str(half),
            "--resumable",
        ]) == 0
        resumed = tmp_path / "resumed"
        code = run([
            "train", "--episodes", "4", "--seed", "9", "--out", str(resumed),
            "--resumable",
            "--resume-from", str(half / "checkpoint_final.qnet"),
        ])
        assert code == 0
        lines = (resumed / "metrics.jsonl").read_text().splitlines()
        episodes = [json.loads(line)["episode"] for line in lines]
        assert episodes == [3, 4]


class TestPlot:
    def test_curves_from_metrics(self, tmp_path):
        out = tmp_path / "run"
        run(["train", "--episodes", "4", "--seed", "2", "--out", str(out)])
        code = run([
            "plot", "--metrics", str(out / "metrics.jsonl"), "--window", "2",
            "--out", str(tmp_path / "curves"),
        ])
        assert code == 0
        assert (tmp_path / "curves" / "reward_curve.csv").exists()
        assert (tmp_path / "curves" / "steps_curve.svg").exists()

    def test_window_larger_than_series_fails(self, tmp_path):
        out = tmp_path / "run"
        run(["train", "--episodes", "2", "--seed", "2", "--out", str(out)])
        code = run([
            "plot", "--metrics", str(out / "metrics.jsonl"), "--window", "50",
        ])
        assert code == 2


class TestReplay:
    def test_trainer_traces_verify(self, tmp_path):
        out = tmp_path / "run"
        trace = tmp_path / "trace.jsonl"
        run([
            "train", "--episodes", "2", "--seed", "6", "--out", str(out),
            "--traces", str(trace),
        ])
        assert run(["replay", "--trace", str(trace)]) == 0

    def test_baseline_traces_verify(self, tmp_path):
        trace = tmp_path / "trace.jsonl"
        run(["baseline", "--episodes", "2", "--seed", "6", "--traces", str(trace)])
        assert run(["replay", "--trace", str(trace)]) == 0

    def test_tampered_trace_exits_two(self, tmp_path, capsys):
        trace = tmp_path / "trace.jsonl"
        run(["baseline", "--episodes", "1", "--seed", "6", "--traces", str(trace)])
        lines = trace.read_text().splitlines()
        index = next(i for i, l in enumerate(lines) if '"kind": "step"' in l)
        record = json.loads(lines[index])
        record["reward"] -= 2.5
        lines[index] = json.dumps(record, sort_keys=True)
        trace.write_text("\n".join(lines) + "\n")
        assert run(["replay", "--trace", str(trace)]) == 2
        err = capsys.readouterr().err
        assert f"line {index + 1}" in err

    def test_missing_trace_exits_two(self, tmp_path):
        assert run(["replay", "--trace", str(tmp_path / "ghost.jsonl")]) == 2

    def test_replay_self_consistency_across_many_runs(self, tmp_path):
        # every trace the trainer emits verifies, across 100 seeded runs
        from sls.env import verify_trace
        from sls.training import TrainConfig, train

        for seed in range(100):
            trace = tmp_path / f"run_{seed}.jsonl"
            train(TrainConfig(
                variant="dqn", episodes=1, seed=seed,
                out_dir=str(tmp_path / f"out_{seed}"),
                trace_path=str(trace),
            ))
            assert verify_trace(trace) > 0


class TestUsage:
    def test_unknown_command(self):
        assert run(["conquer"]) == 1

    def test_missing_required_flag(self):
        assert run(["replay"]) == 1

    def test_bad_flag_value(self):
        assert run(["train", "--episodes", "many"]) == 1

    def test_environment_variable_sets_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SLS_OUT_DIR", str(tmp_path / "envout"))
        assert run(["train", "--episodes", "1", "--seed", "0"]) == 0
        assert (tmp_path / "envout" / "dqn" / "metrics.jsonl").exists()
