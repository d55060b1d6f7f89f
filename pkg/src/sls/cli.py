"""Command-line entry point: train, eval, baseline, plot, replay, serve.

Configuration is layered: built-in defaults, then an optional JSON config
file (keys mirror :class:`~sls.training.TrainConfig` plus the environment
fields), then command-line flags. Unknown config keys are rejected.

Exit codes: 0 success, 1 usage error, 2 runtime failure. The default output
directory can be set with the ``SLS_OUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import agents
from .env import TraceMismatch, verify_trace
from .training import TrainConfig, emit_curves, evaluate, load_metrics, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so we control exit codes."""

    def error(self, message: str):
        raise UsageError(message)


_CONFIG_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


def _load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _default_out_dir() -> str:
    return os.environ.get("SLS_OUT_DIR", "runs")


def _add_env_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--chips", type=int, default=None, help="chips per player")
    parser.add_argument("--reward-cap", type=float, default=None)
    parser.add_argument("--reward-decay", type=float, default=None)
    parser.add_argument("--max-steps", type=int, default=None)


def _env_overrides(args: argparse.Namespace) -> dict:
    pairs = {
        "n_chips": args.chips,
        "reward_cap": args.reward_cap,
        "decay": args.reward_decay,
        "max_steps": args.max_steps,
    }
    return {k: v for k, v in pairs.items() if v is not None}


def build_parser() -> _Parser:
    parser = _Parser(prog="sls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent with self-play")
    p_train.add_argument("--variant", choices=list(agents.LEARNING_VARIANTS), default="dqn")
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--config", type=str, default=None, help="JSON config file")
    p_train.add_argument("--out", type=str, default=None, help="output directory")
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--gamma", type=float, default=None)
    p_train.add_argument("--traces", type=str, default=None,
                         help="write an episode trace file alongside training")
    p_train.add_argument("--resumable", action="store_true",
                         help="include buffer and RNG state in checkpoints")
    p_train.add_argument("--resume-from", type=str, default=None)
    _add_env_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--variant", choices=list(agents.LEARNING_VARIANTS), default="dqn")
    p_eval.add_argument("--episodes", type=int, default=1000)
    p_eval.add_argument("--epsilon", type=float, default=0.01)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", type=str, default=None, help="write the report JSON here")
    p_eval.add_argument("--traces", type=str, default=None)
    _add_env_flags(p_eval)

    p_base = sub.add_parser("baseline", help="evaluate the uniform-random agent")
    p_base.add_argument("--episodes", type=int, default=1000)
    p_base.add_argument("--seed", type=int, default=0)
    p_base.add_argument("--out", type=str, default=None)
    p_base.add_argument("--traces", type=str, default=None)
    _add_env_flags(p_base)

    p_plot = sub.add_parser("plot", help="emit smoothed learning curves")
    p_plot.add_argument("--metrics", required=True, help="metrics.jsonl from train")
    p_plot.add_argument("--window", type=int, default=100)
    p_plot.add_argument("--out", type=str, default=None)

    p_replay = sub.add_parser("replay", help="re-simulate and verify a trace file")
    p_replay.add_argument("--trace", required=True)

    p_serve = sub.add_parser("serve", help="run the human-vs-agent play server")
    p_serve.add_argument("--checkpoint", type=str, default=None)
    p_serve.add_argument("--variant", choices=list(agents.LEARNING_VARIANTS), default="dqn")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", type=str, default="127.0.0.1")
    p_serve.add_argument("--static", type=str, default=None,
                         help="directory with the web UI bundle")
    p_serve.add_argument("--move-delay", type=float, default=0.0,
                         help="seconds between automatic agent moves")
    return parser


def _cmd_train(args: argparse.Namespace) -> int:
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))
    flag_overrides = {
        "variant": args.variant,
        "episodes": args.episodes,
        "seed": args.seed,
        "out_dir": args.out,
        "lr": args.lr,
        "batch_size": args.batch_size,
        "gamma": args.gamma,
        "trace_path": args.traces,
    }
    values.update({k: v for k, v in flag_overrides.items() if v is not None})
    values.update(_env_overrides(args))
    if args.resumable:
        values["resumable"] = True
    values.setdefault("out_dir", str(Path(_default_out_dir()) / values.get("variant", "dqn")))
    config = TrainConfig(**values)
    result = train(config, resume_from=args.resume_from)
    last = result.stats[-1] if result.stats else None
    print(f"trained {config.variant} for {config.episodes} episodes")
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    if last is not None:
        print(f"final episode reward {last.reward:.2f} in {last.steps} steps "
              f"(epsilon {last.epsilon:.4f})")
    return 0


def _report_out(report, out: Optional[str]) -> int:
    text = json.dumps(report.to_json(), indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
        print(f"report written to {out}")
    print(text)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate(
        variant=args.variant,
        checkpoint=args.checkpoint,
        episodes=args.episodes,
        epsilon=args.epsilon,
        seed=args.seed,
        env=_make_env(args),
        trace_path=args.traces,
    )
    return _report_out(report, args.out)


def _cmd_baseline(args: argparse.Namespace) -> int:
    report = evaluate(
        variant=agents.RANDOM,
        episodes=args.episodes,
        seed=args.seed,
        env=_make_env(args),
        trace_path=args.traces,
    )
    return _report_out(report, args.out)


def _make_env(args: argparse.Namespace):
    overrides = _env_overrides(args)
    if not overrides:
        return None
    from .env import SLSEnv
    from .game import GameConfig

    return SLSEnv(
        GameConfig(n_chips=overrides.get("n_chips", 5)),
        reward_cap=overrides.get("reward_cap", 5.0),
        decay=overrides.get("decay", 0.3),
        max_steps=overrides.get("max_steps", 500),
    )


def _cmd_plot(args: argparse.Namespace) -> int:
    stats = load_metrics(args.metrics)
    out = args.out or str(Path(args.metrics).parent)
    written = emit_curves(stats, args.window, out)
    for path in written:
        print(path)
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    count = verify_trace(args.trace)
    print(f"trace verified: {count} steps match re-simulation")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        default_checkpoint=args.checkpoint,
        default_variant=args.variant,
        static_dir=args.static,
        move_delay=args.move_delay,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "baseline": _cmd_baseline,
    "plot": _cmd_plot,
    "replay": _cmd_replay,
    "serve": _cmd_serve,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except TraceMismatch as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
