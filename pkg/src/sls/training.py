"""Training and evaluation harness.

One shared Q-network and one shared replay buffer serve all four seats:
each step the current player acts epsilon-greedily within its phase group,
the transition is stored, and every ``update_period`` steps a minibatch
gradient step runs once the buffer is warm. Epsilon decays per episode; the
target network hard-syncs (and a checkpoint is written) on a fixed episode
cadence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from . import agents, nn
from .env import SLSEnv, TraceWriter, phase_group_mask
from .game import GameConfig


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters and bookkeeping for one training run."""

    variant: str = agents.DQN
    episodes: int = 10_000
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.01
    lr: float = 0.001
    batch_size: int = 64
    update_period: int = 10
    sync_period: int = 500          # episodes between target syncs/checkpoints
    buffer_capacity: int = 50_000
    hidden: int = 64
    seed: int = 0
    out_dir: str = "runs/default"
    # environment
    n_chips: int = 5
    n_rows: int = 6
    payoff: int = 1
    reward_cap: float = 5.0
    decay: float = 0.3
    max_steps: int = 500
    # optional artifacts
    trace_path: Optional[str] = None
    resumable: bool = False         # include buffer + RNG state in checkpoints

    def __post_init__(self) -> None:
        if self.variant not in agents.LEARNING_VARIANTS:
            raise ValueError(f"cannot train variant {self.variant!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        for name in ("episodes", "batch_size", "update_period", "sync_period",
                     "buffer_capacity", "hidden", "max_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def game_config(self, seed: int = 0) -> GameConfig:
        return GameConfig(n_chips=self.n_chips, n_rows=self.n_rows,
                          payoff=self.payoff, seed=seed)

    def env(self) -> SLSEnv:
        return SLSEnv(self.game_config(), reward_cap=self.reward_cap,
                      decay=self.decay, max_steps=self.max_steps)

    def hash(self) -> str:
        """Digest of the learning-relevant fields.

        The episode horizon, output paths, and checkpoint verbosity do not
        change what is being learned, so runs that differ only there are
        resume-compatible.
        """
        fields = asdict(self)
        for run_level in ("episodes", "out_dir", "trace_path", "resumable"):
            fields.pop(run_level)
        blob = json.dumps(fields, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class EpisodeStats:
    """Per-episode record; one JSON line each in the metrics stream."""

    episode: int
    reward: float        # sum of all seats' rewards
    steps: int
    illegal: int
    epsilon: float
    loss: Optional[float]
    winner: Optional[int]
    updates: int = 0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    stats: List[EpisodeStats]
    checkpoint_path: Path
    metrics_path: Path
    params: nn.NetworkParams


def _rng_streams(seed: int) -> dict:
    """Independent, reproducible generator streams for one run."""
    root = np.random.SeedSequence(seed)
    init_ss, buffer_ss, explore_ss, episode_ss = root.spawn(4)
    return {
        "init_seed": int(init_ss.generate_state(1)[0]),
        "buffer_seed": int(buffer_ss.generate_state(1)[0]),
        "explore": np.random.default_rng(explore_ss),
        "episode_seeds": np.random.default_rng(episode_ss),
    }


def _generator_state(gen: np.random.Generator) -> dict:
    return gen.bit_generator.state


def _restore_generator(state: dict) -> np.random.Generator:
    gen = np.random.default_rng(0)
    gen.bit_generator.state = state
    return gen


def run_episode(
    env: SLSEnv,
    variant: str,
    online: nn.NetworkParams,
    target: Optional[nn.NetworkParams],
    buffer: Optional[agents.ReplayBuffer],
    epsilon: float,
    explore_rng: np.random.Generator,
    episode_seed: int,
    *,
    gamma: float = 0.95,
    batch_size: int = 64,
    update_period: int = 10,
    adam: Optional[nn.AdamState] = None,
    trace: Optional[TraceWriter] = None,
    trace_index: int = 0,
) -> EpisodeStats:
    """Play one episode; learn only when ``adam`` is provided."""
    obs, player, _ = env.reset(seed=episode_seed)
    if trace is not None:
        trace.start_episode(trace_index, episode_seed)
    total = 0.0
    illegal = 0
    losses: List[float] = []
    updates = 0
    t = 0
    while True:
        t += 1
        phase = env.state.phase
        mask = phase_group_mask(phase)
        action = agents.select_action(variant, online, obs, mask, epsilon, explore_rng)
        result = env.step(action)
        total += result.reward
        if not result.info.legal:
            illegal += 1
        if trace is not None:
            trace.record_step(t, player, phase, action, result.info.legal,
                              result.reward, result.done)
        if buffer is not None:
            buffer.push(agents.Transition(
                obs=obs,
                action=action,
                reward=result.reward,
                next_obs=result.observation,
                next_phase_mask=result.info.phase_mask,
                done=result.done,
            ))
        if (
            adam is not None
            and buffer is not None
            and len(buffer) > batch_size
            and t % update_period == 0
        ):
            batch = buffer.sample(batch_size)
            targets = agents.compute_targets(variant, online, target, batch, gamma)
            train_batch = nn.Batch(batch.obs, batch.actions, targets)
            losses.append(nn.loss(online, train_batch))
            grads = nn.backward(online, train_batch)
            nn.adam_step(online, grads, adam)
            updates += 1
        if result.done:
            break
        obs = result.observation
        player = env.state.current_player
    return EpisodeStats(
        episode=0,
        reward=total,
        steps=t,
        illegal=illegal,
        epsilon=epsilon,
        loss=float(np.mean(losses)) if losses else None,
        winner=env.state.terminal,
        updates=updates,
    )


def train(config: TrainConfig, resume_from: Optional[str] = None) -> TrainResult:
    """Run the full training loop, writing metrics and checkpoints to disk."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.jsonl"

    streams = _rng_streams(config.seed)
    arch = agents.architecture_for(config.variant)
    env = config.env()
    online = nn.init(arch, env.spec.obs_size, streams["init_seed"], hidden=config.hidden)
    adam = nn.init_adam(online, lr=config.lr)
    buffer = agents.ReplayBuffer(config.buffer_capacity, seed=streams["buffer_seed"])
    explore_rng = streams["explore"]
    episode_rng = streams["episode_seeds"]
    epsilon = config.epsilon_start
    start_episode = 0

    if resume_from is not None:
        bundle = load_resume_bundle(resume_from)
        if bundle["config_hash"] != config.hash():
            raise ValueError("resume checkpoint was produced by a different config")
        online = bundle["online"]
        target = bundle["target"]
        adam = bundle["adam"]
        buffer.restore(bundle["buffer"])
        buffer.rng.bit_generator.state = bundle["rng"]["buffer"]
        explore_rng = _restore_generator(bundle["rng"]["explore"])
        episode_rng = _restore_generator(bundle["rng"]["episode_seeds"])
        epsilon = bundle["epsilon"]
        start_episode = bundle["episode"]
        metrics_mode = "a"
    else:
        target = nn.copy_params(online)
        metrics_mode = "w"

    schedule = agents.ExplorationSchedule(
        epsilon=epsilon, decay=config.epsilon_decay, floor=config.epsilon_min
    )
    stats: List[EpisodeStats] = []
    trace = None
    if config.trace_path and resume_from is None:
        trace = TraceWriter(config.trace_path, env.config, env.spec)

    checkpoint_path = out_dir / "checkpoint_final.qnet"
    try:
        with open(metrics_path, metrics_mode, encoding="utf-8") as metrics_fh:
            for episode in range(start_episode + 1, config.episodes + 1):
                episode_seed = int(episode_rng.integers(2**31))
                record = run_episode(
                    env,
                    config.variant,
                    online,
                    target,
                    buffer,
                    schedule.epsilon,
                    explore_rng,
                    episode_seed,
                    gamma=config.gamma,
                    batch_size=config.batch_size,
                    update_period=config.update_period,
                    adam=adam,
                    trace=trace,
                    trace_index=episode,
                )
                record = replace(record, episode=episode)
                stats.append(record)
                metrics_fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
                schedule.decay_episode()
                if episode % config.sync_period == 0:
                    target = nn.copy_params(online)
                    _write_checkpoint(
                        out_dir / f"checkpoint_ep{episode:06d}.qnet",
                        config, online, target, adam, buffer,
                        explore_rng, episode_rng, schedule.epsilon, episode,
                    )
    finally:
        if trace is not None:
            trace.close()

    _write_checkpoint(
        checkpoint_path, config, online, target, adam, buffer,
        explore_rng, episode_rng, schedule.epsilon,
        config.episodes,
    )
    return TrainResult(stats=stats, checkpoint_path=checkpoint_path,
                       metrics_path=metrics_path, params=online)


def _write_checkpoint(path: Path, config: TrainConfig, online: nn.NetworkParams,
                      target: nn.NetworkParams, adam: nn.AdamState,
                      buffer: agents.ReplayBuffer,
                      explore_rng: np.random.Generator,
                      episode_rng: np.random.Generator,
                      epsilon: float, episode: int) -> None:
    nn.save_params(path, online)
    sidecar = {
        "episode": episode,
        "epsilon": epsilon,
        "variant": config.variant,
        "config_hash": config.hash(),
        "resumable": config.resumable,
    }
    if config.resumable:
        nn.save_params(path.with_suffix(".target.qnet"), target)
        np.savez(
            path.with_suffix(".adam.npz"),
            t=adam.t,
            **{f"m_{k}": v for k, v in adam.m.items()},
            **{f"v_{k}": v for k, v in adam.v.items()},
        )
        np.savez(path.with_suffix(".buffer.npz"), **buffer.snapshot())
        sidecar["rng"] = {
            "explore": _generator_state(explore_rng),
            "episode_seeds": _generator_state(episode_rng),
            "buffer": _generator_state(buffer.rng),
        }
        sidecar["adam_hparams"] = {
            "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps,
        }
    with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)


def load_resume_bundle(path) -> dict:
    """Read back everything `_write_checkpoint` stored for a resumable run."""
    path = Path(path)
    with open(path.with_suffix(".json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    if not sidecar.get("resumable"):
        raise ValueError(f"{path} is not a resumable checkpoint")
    online = nn.load_params(path)
    target = nn.load_params(path.with_suffix(".target.qnet"))
    with np.load(path.with_suffix(".adam.npz")) as data:
        hp = sidecar["adam_hparams"]
        adam = nn.AdamState(
            m={k[2:]: data[k].copy() for k in data.files if k.startswith("m_")},
            v={k[2:]: data[k].copy() for k in data.files if k.startswith("v_")},
            t=int(data["t"]),
            lr=hp["lr"], beta1=hp["beta1"], beta2=hp["beta2"], eps=hp["eps"],
        )
    with np.load(path.with_suffix(".buffer.npz")) as data:
        buffer_data = {k: data[k].copy() for k in data.files}
    return {
        "online": online,
        "target": target,
        "adam": adam,
        "buffer": buffer_data,
        "rng": sidecar["rng"],
        "epsilon": sidecar["epsilon"],
        "episode": sidecar["episode"],
        "config_hash": sidecar["config_hash"],
    }


# --- evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class StatBlock:
    mean: float
    stdev: float   # population standard deviation (ddof=0)
    min: float
    max: float

    @staticmethod
    def of(values: Iterable[float]) -> "StatBlock":
        arr = np.asarray(list(values), dtype=np.float64)
        return StatBlock(
            mean=float(arr.mean()),
            stdev=float(arr.std(ddof=0)),
            min=float(arr.min()),
            max=float(arr.max()),
        )


@dataclass(frozen=True)
class EvalReport:
    variant: str
    checkpoint: Optional[str]
    episodes: int
    reward: StatBlock
    steps: StatBlock

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "checkpoint": self.checkpoint,
            "episodes": self.episodes,
            "reward": asdict(self.reward),
            "steps": asdict(self.steps),
        }


def evaluate(
    variant: str,
    checkpoint: Optional[str] = None,
    episodes: int = 1000,
    epsilon: float = 0.01,
    seed: int = 0,
    env: Optional[SLSEnv] = None,
    params: Optional[nn.NetworkParams] = None,
    trace_path: Optional[str] = None,
) -> EvalReport:
    """Frozen-policy evaluation: no buffer, no updates, fixed epsilon."""
    if variant not in agents.VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant != agents.RANDOM and params is None:
        if checkpoint is None:
            raise ValueError("evaluation of a learning variant needs a checkpoint")
        params = nn.load_params(checkpoint)
    env = env or SLSEnv(GameConfig())
    streams = _rng_streams(seed)
    explore_rng = streams["explore"]
    episode_rng = streams["episode_seeds"]
    trace = TraceWriter(trace_path, env.config, env.spec) if trace_path else None
    rewards: List[float] = []
    steps: List[int] = []
    try:
        for index in range(1, episodes + 1):
            episode_seed = int(episode_rng.integers(2**31))
            record = run_episode(
                env, variant, params, None, None, epsilon, explore_rng,
                episode_seed, trace=trace, trace_index=index,
            )
            rewards.append(record.reward)
            steps.append(record.steps)
    finally:
        if trace is not None:
            trace.close()
    return EvalReport(
        variant=variant,
        checkpoint=str(checkpoint) if checkpoint else None,
        episodes=episodes,
        reward=StatBlock.of(rewards),
        steps=StatBlock.of(steps),
    )


# --- learning curves --------------------------------------------------------


def moving_average(values, window: int) -> np.ndarray:
    """Means over full windows only; length ``len(values) - window + 1``."""
    arr = np.asarray(list(values), dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if arr.size < window:
        raise ValueError(f"need at least {window} points, got {arr.size}")
    kernel = np.ones(window) / window
    return np.convolve(arr, kernel, mode="valid")


def _render_svg(xs, ys, title: str, width: int = 640, height: int = 360) -> str:
    """A dependency-free, byte-stable line chart."""
    pad = 42
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    px = pad + (xs - x_lo) / x_span * (width - 2 * pad)
    py = height - pad - (ys - y_lo) / y_span * (height - 2 * pad)
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
        f'<text x="{pad}" y="{height - pad + 16}" font-family="sans-serif" font-size="10">{x_lo:g}</text>'
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{x_hi:g}</text>'
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_lo:g}</text>'
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_hi:g}</text>'
        f'<polyline fill="none" stroke="#2266cc" stroke-width="1.5" points="{points}"/>'
        f"</svg>"
    )


def emit_curves(stats: List[EpisodeStats], window: int, out_dir) -> List[Path]:
    """Write smoothed reward and step curves as CSV plus SVG line charts."""
    if not stats:
        raise ValueError("empty metrics stream")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    series = {
        "reward": [s.reward for s in stats],
        "steps": [float(s.steps) for s in stats],
    }
    for name, values in series.items():
        smoothed = moving_average(values, window)
        episodes = [stats[i + window - 1].episode for i in range(len(smoothed))]
        csv_path = out_dir / f"{name}_curve.csv"
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("episode,value\n")
            for ep, value in zip(episodes, smoothed):
                fh.write(f"{ep},{float(value)!r}\n")
        svg_path = out_dir / f"{name}_curve.svg"
        title = f"{name} (window {window})"
        svg_path.write_text(_render_svg(episodes, smoothed, title), encoding="utf-8")
        written.extend([csv_path, svg_path])
    return written


def load_metrics(path) -> List[EpisodeStats]:
    records: List[EpisodeStats] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EpisodeStats(**json.loads(line)))
    return records
