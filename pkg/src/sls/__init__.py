"""So Long Sucker: rules engine, RL environment, learners, and play server."""

from .game import (
    GameConfig,
    GameEvent,
    GameState,
    IllegalMoveError,
    Move,
    Phase,
    apply,
    legal_moves,
    new_game,
    next_player_options,
    state_to_json,
    winner,
)
from .env import (
    EnvSpec,
    SLSEnv,
    StepResult,
    action_mask,
    encode,
    obs_size,
    phase_group_mask,
    shaped_reward,
)
from .agents import ExplorationSchedule, ReplayBuffer, Transition, compute_targets, select_action
from .training import EpisodeStats, EvalReport, TrainConfig, emit_curves, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "GameConfig",
    "GameEvent",
    "GameState",
    "IllegalMoveError",
    "Move",
    "Phase",
    "apply",
    "legal_moves",
    "new_game",
    "next_player_options",
    "state_to_json",
    "winner",
    "EnvSpec",
    "SLSEnv",
    "StepResult",
    "action_mask",
    "encode",
    "obs_size",
    "phase_group_mask",
    "shaped_reward",
    "ExplorationSchedule",
    "ReplayBuffer",
    "Transition",
    "compute_targets",
    "select_action",
    "EpisodeStats",
    "EvalReport",
    "TrainConfig",
    "emit_curves",
    "evaluate",
    "train",
    "__version__",
]
