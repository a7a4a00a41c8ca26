"""Per-game policy/value model: a small MLP trained from planner episodes.

The network is a two-hidden-layer rectifier trunk with a softmax policy head
and a sigmoid value head, implemented directly in numpy (float64 throughout
so saved models reload bit-exactly).  One model per game; training happens
between episodes on a FIFO replay buffer, and planners only ever see
immutable snapshots.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .game import NUM_ACTIONS, GameState, GridObservation, ScoreBounds, heuristic_value, observe
from .gdf import KIND_COUNT, GameSpec

MODEL_MAGIC = b"THY1"


class ModelFileError(RuntimeError):
    """Model file missing, truncated, or inconsistent."""


class NonFiniteLossError(RuntimeError):
    """Training step aborted: loss or gradients were not finite."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction), last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# features

class FeatureExtractor:
    """Flattens a grid observation plus state scalars into a fixed vector.

    Layout: one block of KIND_COUNT indicator planes per cell in row-major
    order, then [tick/timeout, score value in [0,1], key-held flag].
    """

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.width = spec.width
        self.height = spec.height
        self.length = self.width * self.height * KIND_COUNT + 3

    def from_observation(self, obs: GridObservation, tick_norm: float, score_norm: float,
                         key_flag: float) -> np.ndarray:
        if obs.width != self.width or obs.height != self.height:
            raise ValueError(
                f"observation is {obs.width}x{obs.height}, extractor expects {self.width}x{self.height}"
            )
        vec = np.zeros(self.length, dtype=np.float64)
        i = 0
        for row in obs.cells:
            for mask in row:
                m = mask
                while m:
                    low = m & -m
                    vec[i + low.bit_length() - 1] = 1.0
                    m ^= low
                i += KIND_COUNT
        vec[-3] = tick_norm
        vec[-2] = score_norm
        vec[-1] = key_flag
        return vec

    def featurize(self, state: GameState, bounds: ScoreBounds) -> np.ndarray:
        tick_norm = min(1.0, state.tick / self.spec.timeout)
        score_norm = heuristic_value(state, bounds)
        key_flag = 1.0 if state.keys_held > 0 else 0.0
        return self.from_observation(observe(state), tick_norm, score_norm, key_flag)


# ---------------------------------------------------------------------------
# model

@dataclass
class ModelWeights:
    game_id: str
    sizes: tuple[int, int, int, int]  # input, hidden1, hidden2, actions
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray
    bp: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    step: int = 0

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.wp, self.bp, self.wv, self.bv]

    def weight_matrices(self) -> list[np.ndarray]:
        return [self.w1, self.w2, self.wp, self.wv]

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.game_id, self.sizes,
                            *[a.copy() for a in self.arrays()], step=self.step)

    def same_weights(self, other: "ModelWeights") -> bool:
        """Exact equality of every array, bit for bit."""
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def init_model(game_id: str, input_dim: int, hidden1: int, hidden2: int, seed: int,
               n_actions: int = NUM_ACTIONS) -> ModelWeights:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from a dedicated seed."""
    rng = np.random.default_rng(seed)

    def uniform(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return ModelWeights(
        game_id=game_id,
        sizes=(input_dim, hidden1, hidden2, n_actions),
        w1=uniform(input_dim, (input_dim, hidden1)),
        b1=np.zeros(hidden1),
        w2=uniform(hidden1, (hidden1, hidden2)),
        b2=np.zeros(hidden2),
        wp=uniform(hidden2, (hidden2, n_actions)),
        bp=np.zeros(n_actions),
        wv=uniform(hidden2, (hidden2, 1)),
        bv=np.zeros(1),
        step=0,
    )


def _forward(model: ModelWeights, x: np.ndarray):
    """Batched forward pass; returns (policy, value, caches for backprop)."""
    z1 = x @ model.w1 + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2 + model.b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ model.wp + model.bp
    policy = softmax(logits)
    zv = (a2 @ model.wv + model.bv)[:, 0]
    value = _sigmoid(zv)
    return policy, value, (x, z1, a1, z2, a2)


_VALUE_FLOOR = 1e-12
_VALUE_CEIL = float(np.nextafter(1.0, 0.0))


def predict(model: ModelWeights, features: np.ndarray) -> tuple[np.ndarray, float]:
    """Policy distribution over actions and a value estimate in the open (0,1)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.sizes[0]:
        raise ValueError(f"feature vector has length {x.shape}, model expects {model.sizes[0]}")
    policy, value, _ = _forward(model, x[None, :])
    v = float(min(max(value[0], _VALUE_FLOOR), _VALUE_CEIL))
    return policy[0], v


# ---------------------------------------------------------------------------
# training data

@dataclass(frozen=True)
class TrainingExample:
    features: np.ndarray
    policy: np.ndarray  # target distribution over actions
    value: float  # target in [0,1]


class ReplayBuffer:
    """Bounded FIFO of training examples; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: deque[TrainingExample] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def add(self, example: TrainingExample) -> None:
        self._items.append(example)

    def sample(self, batch_size: int, rng, mode: str = "uniform") -> list[TrainingExample]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        pool = list(self._items)
        if mode == "recency":
            pool = pool[len(pool) // 2:]
        return [pool[rng.randrange(len(pool))] for _ in range(batch_size)]

    def save_npz(self, path: str) -> None:
        if self._items:
            feats = np.stack([e.features for e in self._items])
            pols = np.stack([e.policy for e in self._items])
            vals = np.array([e.value for e in self._items])
        else:
            feats = np.zeros((0, 0))
            pols = np.zeros((0, 0))
            vals = np.zeros(0)
        np.savez(path, features=feats, policies=pols, values=vals,
                 capacity=np.array([self.capacity]))

    @staticmethod
    def load_npz(path: str) -> "ReplayBuffer":
        data = np.load(path)
        buf = ReplayBuffer(int(data["capacity"][0]))
        for f, p, v in zip(data["features"], data["policies"], data["values"]):
            buf.add(TrainingExample(np.array(f), np.array(p), float(v)))
        return buf


def policy_target(population) -> np.ndarray:
    """Fitness-weighted distribution of the population's first actions."""
    weights = np.zeros(NUM_ACTIONS, dtype=np.float64)
    for ind in population:
        fitness = ind.fitness if ind.fitness is not None else 0.0
        weights[int(ind.genes[0])] += fitness
    total = weights.sum()
    if total <= 0.0:
        return np.full(NUM_ACTIONS, 1.0 / NUM_ACTIONS)
    return weights / total


def record_episode(buffer: ReplayBuffer, steps: Iterable[tuple[np.ndarray, np.ndarray]],
                   terminal_value: float) -> int:
    """Append one example per tick, all sharing the episode's terminal value."""
    n = 0
    for features, target in steps:
        buffer.add(TrainingExample(features, np.asarray(target, dtype=np.float64),
                                   float(terminal_value)))
        n += 1
    return n


# ---------------------------------------------------------------------------
# training

def loss_and_gradients(model: ModelWeights, batch: Sequence[TrainingExample],
                       l2: float = 0.0):
    """Mean [cross-entropy(policy) + squared error(value)] and its gradients.

    L2 (if nonzero) penalises weight matrices only, as l2/2 * sum(w^2).
    """
    if not batch:
        raise ValueError("empty batch")
    x = np.stack([e.features for e in batch])
    targets_p = np.stack([e.policy for e in batch])
    targets_v = np.array([e.value for e in batch])
    n = x.shape[0]

    policy, value, (xin, z1, a1, z2, a2) = _forward(model, x)
    p_safe = np.clip(policy, 1e-300, None)
    ce = -(targets_p * np.log(p_safe)).sum(axis=1)
    se = (value - targets_v) ** 2
    loss = float((ce + se).mean())
    if l2 > 0.0:
        loss += 0.5 * l2 * sum(float((w ** 2).sum()) for w in model.weight_matrices())

    # policy head: d(ce)/d(logits) = policy - target
    d_logits = (policy - targets_p) / n
    # value head through the sigmoid: d(se)/d(zv) = 2 (v - t) v (1 - v)
    d_zv = (2.0 * (value - targets_v) * value * (1.0 - value) / n)[:, None]

    grads = {
        "wp": a2.T @ d_logits,
        "bp": d_logits.sum(axis=0),
        "wv": a2.T @ d_zv,
        "bv": d_zv.sum(axis=0),
    }
    d_a2 = d_logits @ model.wp.T + d_zv @ model.wv.T
    d_z2 = d_a2 * (z2 > 0.0)
    grads["w2"] = a1.T @ d_z2
    grads["b2"] = d_z2.sum(axis=0)
    d_a1 = d_z2 @ model.w2.T
    d_z1 = d_a1 * (z1 > 0.0)
    grads["w1"] = xin.T @ d_z1
    grads["b1"] = d_z1.sum(axis=0)
    if l2 > 0.0:
        for name in ("w1", "w2", "wp", "wv"):
            grads[name] = grads[name] + l2 * getattr(model, name)
    return loss, grads


_GRAD_ORDER = ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")


def train_step(model: ModelWeights, batch: Sequence[TrainingExample], learning_rate: float,
               *, l2: float = 0.0, grad_clip: float = 0.0,
               velocity: dict[str, np.ndarray] | None = None, momentum: float = 0.0) -> float:
    """One gradient-descent update in place; returns the pre-update loss.

    On a non-finite loss or gradient the model is left untouched and
    NonFiniteLossError is raised.
    """
    loss, grads = loss_and_gradients(model, batch, l2=l2)
    finite = np.isfinite(loss) and all(np.isfinite(g).all() for g in grads.values())
    if not finite:
        raise NonFiniteLossError(f"non-finite loss/gradients at step {model.step}")

    if grad_clip > 0.0:
        norm = float(np.sqrt(sum((g ** 2).sum() for g in grads.values())))
        if norm > grad_clip:
            scale = grad_clip / norm
            grads = {k: g * scale for k, g in grads.items()}

    for name in _GRAD_ORDER:
        g = grads[name]
        if momentum > 0.0 and velocity is not None:
            v = velocity.get(name)
            v = momentum * v - learning_rate * g if v is not None else -learning_rate * g
            velocity[name] = v
            getattr(model, name)[...] += v
        else:
            getattr(model, name)[...] -= learning_rate * g
    model.step += 1
    return loss


class Trainer:
    """Owns one model's training loop, configured from the parameter registry."""

    def __init__(self, model: ModelWeights, params):
        self.model = model
        self.learning_rate = float(params["learning_rate"])
        self.lr_decay = float(params["lr_decay"])
        self.l2 = float(params["l2_reg"])
        self.grad_clip = float(params["grad_clip"])
        self.momentum = 0.9 if params["optimizer"] == "momentum" else 0.0
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, batch: Sequence[TrainingExample]) -> float:
        loss = train_step(self.model, batch, self.learning_rate, l2=self.l2,
                          grad_clip=self.grad_clip, velocity=self.velocity,
                          momentum=self.momentum)
        self.learning_rate *= self.lr_decay
        return loss

    def save_aux(self, path: str) -> None:
        np.savez(path, learning_rate=np.array([self.learning_rate]),
                 **{f"v_{k}": v for k, v in self.velocity.items()})

    def load_aux(self, path: str) -> None:
        data = np.load(path)
        self.learning_rate = float(data["learning_rate"][0])
        self.velocity = {k[2:]: np.array(data[k]) for k in data.files if k.startswith("v_")}


# ---------------------------------------------------------------------------
# persistence: versioned binary layout, little-endian
#   "THY1" | u32 game-id length | game-id utf-8 | 4 x u32 dims | u64 step
#   | weights as row-major float64 in order w1 b1 w2 b2 wp bp wv bv

def save_model(model: ModelWeights, path: str) -> None:
    blob = bytearray()
    blob += MODEL_MAGIC
    game = model.game_id.encode("utf-8")
    blob += struct.pack("<I", len(game)) + game
    blob += struct.pack("<4I", *model.sizes)
    blob += struct.pack("<Q", model.step)
    for arr in model.arrays():
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def _expected_shapes(sizes: tuple[int, int, int, int]) -> list[tuple[int, ...]]:
    d_in, h1, h2, n_act = sizes
    return [(d_in, h1), (h1,), (h1, h2), (h2,), (h2, n_act), (n_act,), (h2, 1), (1,)]


def load_model(path: str, expect_game: str | None = None) -> ModelWeights:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc

    def take(n: int, offset: int) -> tuple[bytes, int]:
        if offset + n > len(blob):
            raise ModelFileError(f"model file {path} is truncated")
        return blob[offset:offset + n], offset + n

    head, off = take(4, 0)
    if head != MODEL_MAGIC:
        raise ModelFileError(f"{path} is not a model file (bad magic)")
    raw, off = take(4, off)
    (game_len,) = struct.unpack("<I", raw)
    raw, off = take(game_len, off)
    game_id = raw.decode("utf-8")
    raw, off = take(16, off)
    sizes = struct.unpack("<4I", raw)
    raw, off = take(8, off)
    (step,) = struct.unpack("<Q", raw)

    arrays = []
    for shape in _expected_shapes(sizes):
        count = int(np.prod(shape))
        raw, off = take(count * 8, off)
        arrays.append(np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape))
    if off != len(blob):
        raise ModelFileError(f"{path} has {len(blob) - off} trailing bytes")

    if expect_game is not None and game_id != expect_game:
        raise ModelFileError(f"{path} holds a model for {game_id!r}, expected {expect_game!r}")
    return ModelWeights(game_id, tuple(sizes), *arrays, step=step)


# ---------------------------------------------------------------------------
# planner-facing handle

class GuidanceModel:
    """Immutable policy/value view over one game's model, as planners see it.

    Wraps the weights with the game's feature extractor and the lifetime
    score bounds in effect when the snapshot was taken.
    """

    def __init__(self, weights: ModelWeights, extractor: FeatureExtractor, bounds: ScoreBounds):
        self.weights = weights
        self.extractor = extractor
        self.bounds = ScoreBounds(bounds.low, bounds.high)

    @property
    def version(self) -> int:
        return self.weights.step

    def policy(self, state: GameState) -> np.ndarray:
        return predict(self.weights, self.extractor.featurize(state, self.bounds))[0]

    def value(self, state: GameState) -> float:
        return predict(self.weights, self.extractor.featurize(state, self.bounds))[1]
