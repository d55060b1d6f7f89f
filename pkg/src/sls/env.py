"""Single-agent-at-a-time MDP wrapper around the rules engine.

The environment flattens a :class:`~sls.game.GameState` into a fixed-length
numeric vector, exposes the 10-action space (6 pile picks, 4 color/player
picks) with per-phase masking, and shapes rewards so legal play earns a
step-decaying bonus while illegal attempts cost a flat penalty without
advancing the game.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .game import (
    GameConfig,
    GameState,
    IllegalMoveError,
    Move,
    Phase,
    PHASE_ORDER,
    apply,
    legal_moves,
    new_game,
    state_to_json,
)

N_ACTIONS = 10
PILE_ACTIONS = tuple(range(0, 6))
PLAYER_ACTIONS = tuple(range(6, 10))

# The step counter is two orders of magnitude larger than every other
# feature; feeding it raw destabilizes Q-learning (measured: training
# diverges), so the encoder rescales it.
STEP_SCALE = 0.01

_PHASE_INDEX = {phase: i for i, phase in enumerate(PHASE_ORDER)}


def obs_size(config: GameConfig) -> int:
    """Flat observation length: board one-hot block, holdings matrix,
    eliminated flags, current-player one-hot, phase one-hot, step counter."""
    n = config.n_players
    return config.n_rows * n * config.max_pile + n * n + 2 * n + 4 + 1


@dataclass(frozen=True)
class EnvSpec:
    """Environment shape and reward parameters."""

    obs_size: int
    action_count: int = N_ACTIONS
    reward_cap: float = 5.0
    decay: float = 0.3
    n_chips: int = 5
    max_steps: int = 500

    def __post_init__(self) -> None:
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if self.reward_cap <= 0:
            raise ValueError("reward_cap must be positive")
        if self.action_count != N_ACTIONS:
            raise ValueError(f"action_count is fixed at {N_ACTIONS}")

    @staticmethod
    def for_game(
        config: GameConfig,
        reward_cap: float = 5.0,
        decay: float = 0.3,
        max_steps: int = 500,
    ) -> "EnvSpec":
        return EnvSpec(
            obs_size=obs_size(config),
            reward_cap=reward_cap,
            decay=decay,
            n_chips=config.n_chips,
            max_steps=max_steps,
        )


def shaped_reward(t: float, legal: bool, *, reward_cap: float = 5.0,
                  decay: float = 0.3, n_chips: int = 5) -> float:
    """Reward for the move taken at step ``t`` (1-based).

    Illegal attempts cost ``-reward_cap`` at any step. Legal moves earn
    ``min(reward_cap, reward_cap / ((decay / n_chips) * t))``: the full cap
    early on, then a hyperbolic decay that discourages dawdling.
    """
    if not legal:
        return -reward_cap
    if t <= 0:
        raise ValueError("legal moves require step index t >= 1")
    return min(reward_cap, reward_cap / ((decay / n_chips) * t))


def encode(state: GameState, spec: Optional[EnvSpec] = None) -> np.ndarray:
    """Flatten a game state into a float32 vector.

    Layout, in order:

    * board block: one entry per (row, depth, color); 1 where the pile at
      that row holds a chip of that color at that depth (bottom = depth 0)
    * holdings block: the raw count matrix, row-major over (holder, color)
    * eliminated flags, one per player
    * current-player one-hot (all zero once the game is over)
    * phase one-hot (all zero once the game is over)
    * step count times ``STEP_SCALE``
    """
    config = state.config
    n = config.n_players
    max_pile = config.max_pile
    size = spec.obs_size if spec is not None else obs_size(config)
    out = np.zeros(size, dtype=np.float32)

    for r, pile in enumerate(state.board):
        base = r * max_pile * n
        for depth, color in enumerate(pile):
            out[base + depth * n + color] = 1.0

    offset = config.n_rows * max_pile * n
    for holder in range(n):
        row = state.holdings[holder]
        for color in range(n):
            out[offset + holder * n + color] = row[color]
    offset += n * n

    for p in range(n):
        if state.eliminated[p]:
            out[offset + p] = 1.0
    offset += n

    if not state.is_terminal:
        out[offset + state.current_player] = 1.0
    offset += n

    if not state.is_terminal:
        out[offset + _PHASE_INDEX[state.phase]] = 1.0
    offset += 4

    out[offset] = state.step_count * STEP_SCALE
    return out


def phase_group_mask(phase: Optional[Phase]) -> np.ndarray:
    """Coarse mask of the action group a phase admits (no legality check).

    Pile actions 0-5 for choose-pile, player actions 6-9 for the three
    color-based phases; all false for a finished game (``phase=None``).
    """
    mask = np.zeros(N_ACTIONS, dtype=bool)
    if phase is None:
        return mask
    if phase is Phase.CHOOSE_PILE:
        mask[list(PILE_ACTIONS)] = True
    else:
        mask[list(PLAYER_ACTIONS)] = True
    return mask


def action_mask(state: GameState) -> np.ndarray:
    """Exact legality mask over the 10 actions for this state."""
    mask = np.zeros(N_ACTIONS, dtype=bool)
    for move in legal_moves(state):
        mask[move.index if move.kind == "row" else 6 + move.index] = True
    return mask


def action_to_move(action: int, phase: Phase) -> Optional[Move]:
    """Translate an action id into a move for the given phase.

    Returns ``None`` when the id does not belong to the phase's group
    (those attempts are illegal by construction).
    """
    if phase is Phase.CHOOSE_PILE:
        return Move.row(action) if action in PILE_ACTIONS else None
    return Move.color(action - 6) if action in PLAYER_ACTIONS else None


@dataclass(frozen=True)
class StepInfo:
    legal: bool
    events: tuple
    acting_player: int
    phase_mask: np.ndarray  # phase-group mask of the state after the step


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: StepInfo


class SLSEnv:
    """Episode lifecycle around the rules engine.

    One env instance owns one game at a time. ``step`` accepts raw action
    ids; illegal ids leave the game untouched (the same player retries) but
    still advance the step counter and cost the flat penalty.
    """

    def __init__(
        self,
        config: GameConfig = GameConfig(),
        reward_cap: float = 5.0,
        decay: float = 0.3,
        max_steps: int = 500,
    ):
        if config.n_rows != len(PILE_ACTIONS):
            raise ValueError(
                f"the 10-action space requires n_rows={len(PILE_ACTIONS)}"
            )
        self.config = config
        self.spec = EnvSpec.for_game(config, reward_cap, decay, max_steps)
        self.state: Optional[GameState] = None
        self._done = True

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, seed: Optional[int] = None):
        """Start a fresh episode; returns (observation, acting player, mask)."""
        config = self.config if seed is None else GameConfig(
            n_players=self.config.n_players,
            n_chips=self.config.n_chips,
            n_rows=self.config.n_rows,
            payoff=self.config.payoff,
            seed=seed,
        )
        self.state = new_game(config)
        self._done = False
        return encode(self.state, self.spec), self.state.current_player, action_mask(self.state)

    def step(self, action: int) -> StepResult:
        if self._done or self.state is None:
            raise RuntimeError("episode is finished; call reset() first")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action id must be in [0, {N_ACTIONS})")

        state = self.state
        actor = state.current_player
        t = state.step_count + 1
        move = action_to_move(action, state.phase)

        legal = False
        events: tuple = ()
        if move is not None:
            try:
                new_state, event_list = apply(state, move)
            except IllegalMoveError:
                pass
            else:
                new_state.step_count = t
                self.state = new_state
                legal = True
                events = tuple(event_list)
        if not legal:
            state.step_count = t  # illegal attempts still consume a step

        reward = shaped_reward(
            t,
            legal,
            reward_cap=self.spec.reward_cap,
            decay=self.spec.decay,
            n_chips=self.spec.n_chips,
        )
        current = self.state
        self._done = current.is_terminal or t >= self.spec.max_steps
        mask = phase_group_mask(None if current.is_terminal else current.phase)
        return StepResult(
            observation=encode(current, self.spec),
            reward=reward,
            done=self._done,
            info=StepInfo(
                legal=legal,
                events=events,
                acting_player=actor,
                phase_mask=mask,
            ),
        )

    def action_mask(self) -> np.ndarray:
        if self.state is None:
            raise RuntimeError("no active episode")
        return action_mask(self.state)

    def snapshot(self) -> dict:
        if self.state is None:
            raise RuntimeError("no active episode")
        return state_to_json(self.state)


# --- episode trace files ------------------------------------------------
#
# JSON-lines format. First line is a header carrying the game and env
# parameters; each episode opens with an "episode" record holding its seed,
# followed by one "step" record per env.step call:
#   {"kind": "step", "t": ..., "player": ..., "phase": ..., "action": ...,
#    "legal": ..., "reward": ..., "done": ...}
# Traces are re-simulated by ``verify_trace`` and must match field-for-field.

TRACE_FORMAT = 1


class TraceMismatch(Exception):
    """A trace record disagrees with re-simulation."""

    def __init__(self, line_no: int, field_name: str, expected, actual):
        self.line_no = line_no
        self.field_name = field_name
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"trace mismatch at line {line_no}: field {field_name!r} "
            f"re-simulates to {expected!r} but trace says {actual!r}"
        )


class TraceWriter:
    """Append-only writer for episode trace files."""

    def __init__(self, path, config: GameConfig, spec: EnvSpec):
        self._fh = open(path, "w", encoding="utf-8")
        self._write(
            {
                "kind": "header",
                "format": TRACE_FORMAT,
                "game": {
                    "n_players": config.n_players,
                    "n_chips": config.n_chips,
                    "n_rows": config.n_rows,
                    "payoff": config.payoff,
                },
                "env": {
                    "reward_cap": spec.reward_cap,
                    "decay": spec.decay,
                    "max_steps": spec.max_steps,
                },
            }
        )

    def _write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")

    def start_episode(self, index: int, seed: int) -> None:
        self._write({"kind": "episode", "index": index, "seed": seed})

    def record_step(self, t: int, player: int, phase: Phase, action: int,
                    legal: bool, reward: float, done: bool) -> None:
        self._write(
            {
                "kind": "step",
                "t": t,
                "player": player,
                "phase": phase.value,
                "action": action,
                "legal": legal,
                "reward": reward,
                "done": done,
            }
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def verify_trace(path) -> int:
    """Re-simulate a trace file and check every step record.

    Returns the number of verified step records; raises
    :class:`TraceMismatch` at the first disagreement, or ``ValueError``
    for structural problems.
    """
    env: Optional[SLSEnv] = None
    steps_checked = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            kind = record.get("kind")
            if kind == "header":
                if record.get("format") != TRACE_FORMAT:
                    raise ValueError(f"unsupported trace format: {record.get('format')}")
                game = record["game"]
                env_params = record["env"]
                env = SLSEnv(
                    GameConfig(
                        n_players=game["n_players"],
                        n_chips=game["n_chips"],
                        n_rows=game["n_rows"],
                        payoff=game["payoff"],
                    ),
                    reward_cap=env_params["reward_cap"],
                    decay=env_params["decay"],
                    max_steps=env_params["max_steps"],
                )
            elif kind == "episode":
                if env is None:
                    raise ValueError(f"line {line_no}: episode before header")
                env.reset(seed=record["seed"])
            elif kind == "step":
                if env is None or env.state is None:
                    raise ValueError(f"line {line_no}: step before episode")
                expected = {
                    "t": env.state.step_count + 1,
                    "player": env.state.current_player,
                    "phase": env.state.phase.value,
                }
                result = env.step(record["action"])
                expected.update(
                    legal=result.info.legal, reward=result.reward, done=result.done
                )
                for field_name, value in expected.items():
                    if record.get(field_name) != value:
                        raise TraceMismatch(line_no, field_name, value, record.get(field_name))
                steps_checked += 1
            else:
                raise ValueError(f"line {line_no}: unknown record kind {kind!r}")
    return steps_checked
