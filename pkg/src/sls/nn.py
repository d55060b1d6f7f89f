"""Minimal dense Q-network: forward pass, exact backprop, and Adam.

Two architectures share a two-hidden-layer ReLU trunk:

* ``standard``: trunk -> linear layer with one output per action
* ``dueling``:  trunk -> scalar value head plus advantage head, combined as
  ``Q(s, a) = V(s) + A(s, a) - mean_a A(s, a)``

Training arithmetic is float32 throughout; tests may cast parameters to
float64 for oracle comparisons. All functions are deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict

import numpy as np

STANDARD = "standard"
DUELING = "dueling"

# Checkpoint array order per architecture; also the init draw order.
LAYOUT = {
    STANDARD: ("w1", "b1", "w2", "b2", "w3", "b3"),
    DUELING: ("w1", "b1", "w2", "b2", "wv", "bv", "wa", "ba"),
}

DEFAULT_HIDDEN = 64
DEFAULT_ACTIONS = 10


@dataclass
class NetworkParams:
    """Weights and biases keyed by layer name, plus the shape metadata."""

    arch: str
    obs_size: int
    arrays: Dict[str, np.ndarray]

    @property
    def hidden(self) -> int:
        return self.arrays["w1"].shape[1]

    @property
    def n_actions(self) -> int:
        key = "w3" if self.arch == STANDARD else "wa"
        return self.arrays[key].shape[1]

    @property
    def dtype(self) -> np.dtype:
        return self.arrays["w1"].dtype


def _shapes(arch: str, obs_size: int, hidden: int, n_actions: int) -> Dict[str, tuple]:
    shapes = {
        "w1": (obs_size, hidden),
        "b1": (hidden,),
        "w2": (hidden, hidden),
        "b2": (hidden,),
    }
    if arch == STANDARD:
        shapes.update(w3=(hidden, n_actions), b3=(n_actions,))
    elif arch == DUELING:
        shapes.update(wv=(hidden, 1), bv=(1,), wa=(hidden, n_actions), ba=(n_actions,))
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    return shapes


def init(arch: str, obs_size: int, seed: int, hidden: int = DEFAULT_HIDDEN,
         n_actions: int = DEFAULT_ACTIONS) -> NetworkParams:
    """Fan-balanced uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    if obs_size < 1:
        raise ValueError("obs_size must be >= 1")
    rng = np.random.default_rng(seed)
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in _shapes(arch, obs_size, hidden, n_actions).items():
        if name.startswith("w"):
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        else:
            arrays[name] = np.zeros(shape, dtype=np.float32)
    return NetworkParams(arch=arch, obs_size=obs_size, arrays=arrays)


def _trunk(params: NetworkParams, x: np.ndarray):
    a = params.arrays
    z1 = x @ a["w1"] + a["b1"]
    h1 = np.maximum(z1, 0)
    z2 = h1 @ a["w2"] + a["b2"]
    h2 = np.maximum(z2, 0)
    return z1, h1, z2, h2


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values, shape (batch, n_actions). Input must be (batch, obs_size)."""
    x = np.asarray(x, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != params.obs_size:
        raise ValueError(
            f"expected input of shape (B, {params.obs_size}), got {x.shape}"
        )
    a = params.arrays
    _, _, _, h2 = _trunk(params, x)
    if params.arch == STANDARD:
        return h2 @ a["w3"] + a["b3"]
    value = h2 @ a["wv"] + a["bv"]
    adv = h2 @ a["wa"] + a["ba"]
    return value + adv - adv.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class Batch:
    """One training minibatch: inputs, chosen action ids, regression targets."""

    inputs: np.ndarray
    actions: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.inputs) == len(self.actions) == len(self.targets)):
            raise ValueError("batch arrays must share their first dimension")


def backward(params: NetworkParams, batch: Batch) -> Dict[str, np.ndarray]:
    """Exact gradients of the mean-squared error over the taken actions.

    The loss is ``mean_i (Q(s_i, a_i) - target_i)^2``; outputs for actions
    not taken carry no gradient.
    """
    a = params.arrays
    dtype = params.dtype
    x = np.asarray(batch.inputs, dtype=dtype)
    actions = np.asarray(batch.actions, dtype=np.int64)
    targets = np.asarray(batch.targets, dtype=dtype)
    if x.ndim != 2 or x.shape[1] != params.obs_size:
        raise ValueError(f"expected inputs of shape (B, {params.obs_size})")
    batch_size = x.shape[0]

    z1, h1, z2, h2 = _trunk(params, x)
    rows = np.arange(batch_size)
    grads: Dict[str, np.ndarray] = {}

    if params.arch == STANDARD:
        q = h2 @ a["w3"] + a["b3"]
        gq = np.zeros_like(q)
        gq[rows, actions] = 2.0 * (q[rows, actions] - targets) / dtype.type(batch_size)
        grads["w3"] = h2.T @ gq
        grads["b3"] = gq.sum(axis=0)
        dh2 = gq @ a["w3"].T
    else:
        value = h2 @ a["wv"] + a["bv"]
        adv = h2 @ a["wa"] + a["ba"]
        q = value + adv - adv.mean(axis=1, keepdims=True)
        gq = np.zeros_like(q)
        gq[rows, actions] = 2.0 * (q[rows, actions] - targets) / dtype.type(batch_size)
        gv = gq.sum(axis=1, keepdims=True)
        ga = gq - gq.mean(axis=1, keepdims=True)
        grads["wv"] = h2.T @ gv
        grads["bv"] = gv.sum(axis=0)
        grads["wa"] = h2.T @ ga
        grads["ba"] = ga.sum(axis=0)
        dh2 = gv @ a["wv"].T + ga @ a["wa"].T

    dz2 = dh2 * (z2 > 0)
    grads["w2"] = h1.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ a["w2"].T
    dz1 = dh1 * (z1 > 0)
    grads["w1"] = x.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def loss(params: NetworkParams, batch: Batch) -> float:
    """The scalar training loss for a batch (for logging)."""
    q = forward(params, batch.inputs)
    picked = q[np.arange(len(batch.actions)), np.asarray(batch.actions, dtype=np.int64)]
    diff = picked - np.asarray(batch.targets, dtype=params.dtype)
    return float(np.mean(diff * diff))


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: NetworkParams, lr: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = {k: np.zeros_like(arr) for k, arr in params.arrays.items()}
    return AdamState(
        m=zeros,
        v={k: np.zeros_like(arr) for k, arr in params.arrays.items()},
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params: NetworkParams, grads: Dict[str, np.ndarray],
              state: AdamState) -> tuple:
    """One bias-corrected Adam update, in place; returns (params, state)."""
    state.t += 1
    dtype = params.dtype
    b1 = dtype.type(state.beta1)
    b2 = dtype.type(state.beta2)
    lr = dtype.type(state.lr)
    eps = dtype.type(state.eps)
    corr1 = dtype.type(1.0) - b1 ** dtype.type(state.t)
    corr2 = dtype.type(1.0) - b2 ** dtype.type(state.t)
    for name, grad in grads.items():
        g = np.asarray(grad, dtype=dtype)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (dtype.type(1.0) - b1) * g
        v *= b2
        v += (dtype.type(1.0) - b2) * (g * g)
        params.arrays[name] -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return params, state


def copy_params(src: NetworkParams) -> NetworkParams:
    """Value copy with independent storage."""
    return NetworkParams(
        arch=src.arch,
        obs_size=src.obs_size,
        arrays={k: arr.copy() for k, arr in src.arrays.items()},
    )


def all_finite(params: NetworkParams) -> bool:
    return all(np.isfinite(arr).all() for arr in params.arrays.values())


# --- checkpoint files ---------------------------------------------------
#
# Little-endian binary. Header:
#   8s  magic  b"SLSQNET1"
#   I   format version (1)
#   B   architecture tag (0 standard, 1 dueling) + 3 pad bytes
#   I   obs_size
#   I   hidden width
#   I   action count
# followed by each parameter array's raw float32 bytes in LAYOUT order.
# Shapes are implied by the header, so the round-trip is bit-exact.

CHECKPOINT_MAGIC = b"SLSQNET1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIB3xIII")
_ARCH_TAGS = {STANDARD: 0, DUELING: 1}
_TAG_ARCHS = {v: k for k, v in _ARCH_TAGS.items()}


class CheckpointError(Exception):
    """Raised for unreadable or inconsistent checkpoint files."""


def save_params(path, params: NetworkParams) -> None:
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        _ARCH_TAGS[params.arch],
        params.obs_size,
        params.hidden,
        params.n_actions,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name in LAYOUT[params.arch]:
            arr = params.arrays[name]
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_params(path) -> NetworkParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CheckpointError("file too short for a checkpoint header")
    magic, version, tag, obs, hidden, n_actions = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic; not a network checkpoint")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if tag not in _TAG_ARCHS:
        raise CheckpointError(f"unknown architecture tag {tag}")
    arch = _TAG_ARCHS[tag]
    arrays: Dict[str, np.ndarray] = {}
    offset = _HEADER.size
    for name, shape in _shapes(arch, obs, hidden, n_actions).items():
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(blob):
            raise CheckpointError(f"truncated checkpoint: array {name!r} incomplete")
        arrays[name] = (
            np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).copy()
        )
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after final parameter array")
    return NetworkParams(arch=arch, obs_size=obs, arrays=arrays)
