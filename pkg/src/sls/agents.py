"""Value-based decision makers and the shared replay buffer.

All four seats act through one set of online parameters (and one target
set); their experience lands in a single buffer. Action choice is masked at
the phase-group level only, so agents can and do attempt illegal moves and
learn from the penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nn
from .env import N_ACTIONS

DQN = "dqn"
DDQN = "ddqn"
DUELING_DQN = "dueling"
RANDOM = "random"

VARIANTS = (DQN, DDQN, DUELING_DQN, RANDOM)
LEARNING_VARIANTS = (DQN, DDQN, DUELING_DQN)


def architecture_for(variant: str) -> str:
    """Network architecture paired with an agent variant."""
    if variant == DUELING_DQN:
        return nn.DUELING
    if variant in (DQN, DDQN):
        return nn.STANDARD
    raise ValueError(f"variant {variant!r} has no network")


@dataclass
class ExplorationSchedule:
    """Per-episode multiplicative epsilon decay with a floor."""

    epsilon: float = 1.0
    decay: float = 0.995
    floor: float = 0.01

    def decay_episode(self) -> float:
        self.epsilon = max(self.floor, self.epsilon * self.decay)
        return self.epsilon


def select_action(
    variant: str,
    params: Optional[nn.NetworkParams],
    obs: np.ndarray,
    mask: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Pick an action id within ``mask``.

    With probability ``epsilon`` (always, for the random variant) the choice
    is uniform over the allowed ids; otherwise it is the argmax of the
    Q-values restricted to the mask, ties going to the lowest id. Training
    passes the phase-group mask; the play server passes full legality.
    """
    allowed = np.flatnonzero(mask)
    if allowed.size == 0:
        raise ValueError("mask allows no actions")
    if variant == RANDOM or rng.random() < epsilon:
        return int(allowed[rng.integers(allowed.size)])
    q = nn.forward(params, obs[np.newaxis, :])[0]
    restricted = np.where(mask, q, -np.inf)
    return int(np.argmax(restricted))


@dataclass(frozen=True)
class Transition:
    """One replay record; ``next_phase_mask`` is the group mask of the
    successor state (all false when the episode ended there)."""

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    next_phase_mask: np.ndarray
    done: bool


@dataclass(frozen=True)
class TransitionBatch:
    obs: np.ndarray          # (B, obs_size)
    actions: np.ndarray      # (B,)
    rewards: np.ndarray      # (B,)
    next_obs: np.ndarray     # (B, obs_size)
    next_masks: np.ndarray   # (B, N_ACTIONS) bool
    dones: np.ndarray        # (B,) bool


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform with-replacement sampling."""

    def __init__(self, capacity: int = 50_000, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list = []
        self._cursor = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._storage)

    def push(self, transition: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self._cursor] = transition  # FIFO overwrite
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int) -> TransitionBatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if len(self._storage) < batch_size:
            raise ValueError(
                f"buffer holds {len(self._storage)} transitions; need {batch_size}"
            )
        idx = self.rng.integers(len(self._storage), size=batch_size)
        picks = [self._storage[i] for i in idx]
        return TransitionBatch(
            obs=np.stack([t.obs for t in picks]),
            actions=np.array([t.action for t in picks], dtype=np.int64),
            rewards=np.array([t.reward for t in picks], dtype=np.float32),
            next_obs=np.stack([t.next_obs for t in picks]),
            next_masks=np.stack([t.next_phase_mask for t in picks]),
            dones=np.array([t.done for t in picks], dtype=bool),
        )

    def snapshot(self) -> dict:
        """Dense arrays for resumable checkpoints."""
        return {
            "obs": np.stack([t.obs for t in self._storage]) if self._storage else np.zeros((0, 0), np.float32),
            "actions": np.array([t.action for t in self._storage], dtype=np.int64),
            "rewards": np.array([t.reward for t in self._storage], dtype=np.float64),
            "next_obs": np.stack([t.next_obs for t in self._storage]) if self._storage else np.zeros((0, 0), np.float32),
            "next_masks": np.stack([t.next_phase_mask for t in self._storage]) if self._storage else np.zeros((0, N_ACTIONS), bool),
            "dones": np.array([t.done for t in self._storage], dtype=bool),
            "cursor": self._cursor,
        }

    def restore(self, data: dict) -> None:
        self._storage = [
            Transition(
                obs=data["obs"][i],
                action=int(data["actions"][i]),
                reward=float(data["rewards"][i]),
                next_obs=data["next_obs"][i],
                next_phase_mask=data["next_masks"][i],
                done=bool(data["dones"][i]),
            )
            for i in range(len(data["actions"]))
        ]
        self._cursor = int(data["cursor"])


def compute_targets(
    variant: str,
    online: nn.NetworkParams,
    target: nn.NetworkParams,
    batch: TransitionBatch,
    gamma: float,
) -> np.ndarray:
    """Regression targets for one minibatch.

    DQN and dueling DQN bootstrap with the target network's masked maximum;
    double DQN picks the argmax with the online network and evaluates it
    with the target network. Finished transitions use the raw reward.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    rewards = batch.rewards.astype(np.float32)
    dones = batch.dones
    live = ~dones
    if np.any(live & ~batch.next_masks.any(axis=1)):
        raise ValueError("non-terminal transition with an empty action mask")

    targets = rewards.copy()
    if not np.any(live):
        return targets
    q_target = nn.forward(target, batch.next_obs)
    masked_target = np.where(batch.next_masks, q_target, -np.inf)
    if variant == DDQN:
        q_online = nn.forward(online, batch.next_obs)
        masked_online = np.where(batch.next_masks, q_online, -np.inf)
        best = np.argmax(masked_online, axis=1)
        bootstrap = q_target[np.arange(len(best)), best]
    elif variant in (DQN, DUELING_DQN):
        bootstrap = masked_target.max(axis=1)
    else:
        raise ValueError(f"no targets for variant {variant!r}")
    targets[live] += np.float32(gamma) * bootstrap.astype(np.float32)[live]
    return targets
