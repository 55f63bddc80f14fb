"""Explainer policy: two stacked gated recurrent layers with a masked
categorical head over the bubble quadruples and a scalar value head,
trained by advantage actor-critic over an experience-replay pool.

Everything is plain float64 numpy; the sequence kernels live in
``kernels`` and carry the numba/numpy dual build.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import (
    NoValidAction,
    NonfiniteGradient,
    PoolTooSmall,
    SchemaError,
    ZeroCost,
)
from .kernels import lstm_backward, lstm_forward, lstm_step

REWARD_EXPONENT_CLAMP = 10.0


@dataclass(frozen=True)
class FeedbackRecord:
    """Per-turn user feedback: task success, confidence, satisfaction."""

    ss: int
    cf: int
    sf: int

    def __post_init__(self):
        if self.ss not in (1, -1):
            raise SchemaError(f"ss must be +1 or -1, got {self.ss}")
        if not (1 <= self.cf <= 5 and 1 <= self.sf <= 5):
            raise SchemaError(f"cf/sf must be 1..5, got cf={self.cf} sf={self.sf}")


@dataclass(frozen=True)
class Experience:
    """One replayed turn."""

    state: np.ndarray
    action: int
    behavior_prob: float
    reward: float
    next_state: np.ndarray | None
    terminal: bool
    turn: int
    valid_mask: np.ndarray

    def __post_init__(self):
        if not (0.0 < self.behavior_prob <= 1.0):
            raise SchemaError(f"behavior_prob {self.behavior_prob} outside (0, 1]")


Episode = tuple[Experience, ...]


@dataclass
class TrainingMetrics:
    objective: float
    mean_advantage: float
    value_loss: float
    entropy: float
    grad_norm: float
    epsilon: float

    def as_dict(self) -> dict:
        return {
            "objective": self.objective,
            "mean_advantage": self.mean_advantage,
            "value_loss": self.value_loss,
            "entropy": self.entropy,
            "grad_norm": self.grad_norm,
            "epsilon": self.epsilon,
        }


@dataclass
class PolicyConfig:
    input_dim: int
    action_count: int
    hidden_size: int = 48
    gamma_rl: float = 0.95
    batch_episodes: int = 32
    pool_capacity: int = 5000
    entropy_bonus: float = 0.01
    value_weight: float = 0.5
    importance_clip: float = 10.0
    learning_rate: float = 0.001
    grad_clip: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    normalize_advantages: bool = True


PARAM_KEYS = ("wx1", "wh1", "b1", "wx2", "wh2", "b2", "wa", "ws", "ba", "wv", "bv")


class PolicyParams:
    """Named tensors with flat-vector views for optimization and for the
    finite-difference checks."""

    def __init__(self, tensors: dict[str, np.ndarray], input_dim: int, hidden: int, actions: int):
        self.tensors = tensors
        self.input_dim = input_dim
        self.hidden = hidden
        self.actions = actions
        for key in PARAM_KEYS:
            if key not in tensors:
                raise SchemaError(f"missing parameter tensor {key!r}")
            if not np.all(np.isfinite(tensors[key])):
                raise SchemaError(f"parameter tensor {key!r} has non-finite values")

    @staticmethod
    def shapes(input_dim: int, hidden: int, actions: int) -> dict[str, tuple[int, ...]]:
        h = hidden
        return {
            "wx1": (4 * h, input_dim),
            "wh1": (4 * h, h),
            "b1": (4 * h,),
            "wx2": (4 * h, h),
            "wh2": (4 * h, h),
            "b2": (4 * h,),
            "wa": (actions, h),
            "ws": (actions, input_dim),  # direct conditioning on the turn features
            "ba": (actions,),
            "wv": (h,),
            "bv": (1,),
        }

    @classmethod
    def init(
        cls, input_dim: int, hidden: int, actions: int, scale: float = 1.0, seed: int = 0
    ) -> "PolicyParams":
        """Fan-in scaled normal init with the forget-gate bias opened to 1;
        ``scale`` multiplies every weight (0 gives the all-zero net)."""
        rng = np.random.default_rng(seed)
        fan = {
            "wx1": input_dim, "wh1": hidden,
            "wx2": hidden, "wh2": hidden,
            "wa": hidden, "wv": hidden,
        }
        tensors = {}
        for key, shape in cls.shapes(input_dim, hidden, actions).items():
            if key in ("b1", "b2"):
                b = np.zeros(shape)
                b[hidden : 2 * hidden] = 1.0 * (scale != 0.0)
                tensors[key] = b
            elif key in ("ba", "bv", "ws"):
                tensors[key] = np.zeros(shape)
            else:
                sigma = scale / math.sqrt(fan[key])
                tensors[key] = rng.normal(0.0, sigma, size=shape) if scale else np.zeros(shape)
        return cls(tensors, input_dim, hidden, actions)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            {k: v.copy() for k, v in self.tensors.items()},
            self.input_dim,
            self.hidden,
            self.actions,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tensors[k].ravel() for k in PARAM_KEYS])

    def with_flat(self, vec: np.ndarray) -> "PolicyParams":
        tensors = {}
        off = 0
        for key in PARAM_KEYS:
            shape = self.tensors[key].shape
            size = int(np.prod(shape))
            tensors[key] = vec[off : off + size].reshape(shape).copy()
            off += size
        return PolicyParams(tensors, self.input_dim, self.hidden, self.actions)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


RecurrentState = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def initial_state(params: PolicyParams) -> RecurrentState:
    h = params.hidden
    return (np.zeros(h), np.zeros(h), np.zeros(h), np.zeros(h))


def masked_softmax(logits: np.ndarray, valid_mask: np.ndarray) -> np.ndarray:
    """Probability distribution over the valid actions; invalid entries are
    exactly zero."""
    if not valid_mask.any():
        raise NoValidAction("action mask admits nothing")
    out = np.zeros_like(logits)
    z = logits[valid_mask]
    z = np.exp(z - z.max())
    out[valid_mask] = z / z.sum()
    return out


def step(params: PolicyParams, x: np.ndarray, state: RecurrentState) -> tuple[np.ndarray, RecurrentState]:
    """Advance both recurrent layers one turn; returns the top hidden state
    for the heads plus the new carry."""
    h1, c1, h2, c2 = state
    t = params.tensors
    h1n, c1n = lstm_step(x, t["wx1"], t["wh1"], t["b1"], h1, c1)
    h2n, c2n = lstm_step(h1n, t["wx2"], t["wh2"], t["b2"], h2, c2)
    return h2n, (h1n, c1n, h2n, c2n)


def heads(
    params: PolicyParams, h2: np.ndarray, x: np.ndarray, valid_mask: np.ndarray
) -> tuple[np.ndarray, float]:
    """Action distribution and value from the top recurrent state; the
    action logits also condition directly on the current turn features."""
    t = params.tensors
    logits = t["wa"] @ h2 + t["ws"] @ x + t["ba"]
    value = float(t["wv"] @ h2 + t["bv"][0])
    return masked_softmax(logits, valid_mask), value


def forward(
    params: PolicyParams, states: np.ndarray, valid_mask: np.ndarray
) -> tuple[np.ndarray, float]:
    """Run the net over a whole turn sequence (T, D) and read the heads at
    the last step: (action distribution over the quadruple space, value)."""
    states = np.ascontiguousarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] == 0:
        raise SchemaError("state sequence must be a nonempty (T, D) array")
    t = params.tensors
    h = params.hidden
    z = np.zeros(h)
    hs1, _, *_ = lstm_forward(states, t["wx1"], t["wh1"], t["b1"], z, z)
    hs2, _, *_ = lstm_forward(hs1, t["wx2"], t["wh2"], t["b2"], z, z)
    return heads(params, hs2[-1], states[-1], valid_mask)


def select_action(
    dist: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    greedy: bool = False,
) -> int:
    """Epsilon-uniform over the valid actions, otherwise sample from the
    distribution (training) or take the argmax (deployment). Argmax ties
    break to the lowest action index."""
    valid = np.flatnonzero(dist > 0.0)
    if valid.size == 0:
        raise NoValidAction("distribution has no support")
    if epsilon > 0.0 and rng.uniform() < epsilon:
        return int(valid[rng.integers(valid.size)])
    if greedy:
        return int(np.argmax(dist))
    p = dist[valid]
    return int(valid[rng.choice(valid.size, p=p / p.sum())])


def reward(feedback: FeedbackRecord, cost: float, turn: int) -> float:
    """Turn reward: success sign times normalized confidence and
    satisfaction, relative to the dialog cost, exponentiated (clamped to
    +-10) and discounted by the turn number."""
    if cost <= 0.0:
        raise ZeroCost(f"dialog cost must be positive, got {cost}")
    if turn < 1:
        raise SchemaError(f"turn must be >= 1, got {turn}")
    cf_norm = (feedback.cf - 1) / 4.0
    sf_norm = (feedback.sf - 1) / 4.0
    exponent = feedback.ss * cf_norm * sf_norm / cost
    exponent = max(-REWARD_EXPONENT_CLAMP, min(REWARD_EXPONENT_CLAMP, exponent))
    return math.exp(exponent) / turn


def anneal_epsilon(step_index: int, total_steps: int) -> float:
    """Linear exploration schedule from 0.6 down to 0.0."""
    if total_steps <= 0:
        return 0.0
    if not (0 <= step_index <= total_steps):
        raise SchemaError(f"step {step_index} outside [0, {total_steps}]")
    return 0.6 * (1.0 - step_index / total_steps)


# ---------------------------------------------------------------------------
# replay pool


class ReplayPool:
    """Bounded FIFO of whole episodes."""

    def __init__(self, capacity: int = 5000):
        self.episodes: deque[Episode] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.episodes)

    def append(self, episode: Sequence[Experience]):
        if not episode:
            raise SchemaError("refusing to store an empty episode")
        self.episodes.append(tuple(episode))

    def sample(self, rng: np.random.Generator, k: int) -> list[Episode]:
        if len(self.episodes) < k:
            raise PoolTooSmall(f"pool holds {len(self.episodes)} episodes, need {k}")
        idx = rng.choice(len(self.episodes), size=k, replace=False)
        return [self.episodes[int(i)] for i in idx]

    def save(self, path):
        arrays = {"pool_version": np.array([1]), "count": np.array([len(self.episodes)])}
        for i, ep in enumerate(self.episodes):
            arrays[f"ep{i}_states"] = np.stack([e.state for e in ep]).astype(np.uint8)
            arrays[f"ep{i}_masks"] = np.stack([e.valid_mask for e in ep]).astype(np.uint8)
            arrays[f"ep{i}_actions"] = np.array([e.action for e in ep], dtype=np.int64)
            arrays[f"ep{i}_probs"] = np.array([e.behavior_prob for e in ep])
            arrays[f"ep{i}_rewards"] = np.array([e.reward for e in ep])
            arrays[f"ep{i}_turns"] = np.array([e.turn for e in ep], dtype=np.int64)
        np.savez_compressed(path, **arrays)

    @staticmethod
    def load(path, capacity: int = 5000) -> "ReplayPool":
        pool = ReplayPool(capacity)
        with np.load(path) as data:
            count = int(data["count"][0])
            for i in range(count):
                states = data[f"ep{i}_states"]
                masks = data[f"ep{i}_masks"].astype(bool)
                actions = data[f"ep{i}_actions"]
                probs = data[f"ep{i}_probs"]
                rewards = data[f"ep{i}_rewards"]
                turns = data[f"ep{i}_turns"]
                steps = []
                for t in range(states.shape[0]):
                    nxt = states[t + 1] if t + 1 < states.shape[0] else None
                    steps.append(
                        Experience(
                            state=states[t],
                            action=int(actions[t]),
                            behavior_prob=float(probs[t]),
                            reward=float(rewards[t]),
                            next_state=nxt,
                            terminal=t + 1 == states.shape[0],
                            turn=int(turns[t]),
                            valid_mask=masks[t],
                        )
                    )
                pool.append(steps)
        return pool


# ---------------------------------------------------------------------------
# training


def _episode_arrays(episode: Episode) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(np.stack([e.state for e in episode]), dtype=np.float64)
    masks = np.stack([e.valid_mask for e in episode])
    actions = np.array([e.action for e in episode], dtype=np.int64)
    rewards = np.array([e.reward for e in episode])
    probs = np.array([e.behavior_prob for e in episode])
    return x, masks, actions, rewards, probs


def _forward_episode(params: PolicyParams, x: np.ndarray):
    t = params.tensors
    z = np.zeros(params.hidden)
    l1 = lstm_forward(x, t["wx1"], t["wh1"], t["b1"], z, z)
    l2 = lstm_forward(l1[0], t["wx2"], t["wh2"], t["b2"], z, z)
    return l1, l2


def _per_step_heads(params: PolicyParams, hs2: np.ndarray, xs: np.ndarray, masks: np.ndarray):
    t = params.tensors
    logits = hs2 @ t["wa"].T + xs @ t["ws"].T + t["ba"]
    values = hs2 @ t["wv"] + t["bv"][0]
    probs = np.zeros_like(logits)
    for i in range(logits.shape[0]):
        probs[i] = masked_softmax(logits[i], masks[i])
    return probs, values


def returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def compute_advantages(
    batch: list[Episode], params: PolicyParams, config: PolicyConfig
) -> list[np.ndarray]:
    """Per-step advantage for whole episodes: discounted return-to-go minus
    the value head's estimate of each visited state."""
    out = []
    for ep in batch:
        x, masks, _, rewards, _ = _episode_arrays(ep)
        _, l2 = _forward_episode(params, x)
        _, values = _per_step_heads(params, l2[0], x, masks)
        q = returns_to_go(rewards, config.gamma_rl)
        out.append(q - values)
    return out


def surrogate_loss_and_grads(
    params: PolicyParams,
    episodes: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    advantages: list[np.ndarray],
    q_targets: list[np.ndarray],
    weights: list[np.ndarray],
    config: PolicyConfig,
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """Mean-per-step surrogate objective and its analytic gradient.

    episodes: (states, masks, actions) triples. advantages, q_targets and
    importance weights are held fixed: the loss is the off-policy
    policy-gradient term plus the value regression minus the entropy bonus,
    exactly what the finite-difference oracle re-evaluates.
    """
    t = params.tensors
    grads = params.zero_grads()
    total_steps = sum(a.shape[0] for a in advantages)
    loss = 0.0
    value_loss_sum = 0.0
    entropy_sum = 0.0
    z0 = np.zeros(params.hidden)

    for (x, masks, actions), adv, q, w in zip(episodes, advantages, q_targets, weights):
        l1 = lstm_forward(x, t["wx1"], t["wh1"], t["b1"], z0, z0)
        l2 = lstm_forward(l1[0], t["wx2"], t["wh2"], t["b2"], z0, z0)
        hs1, hs2 = l1[0], l2[0]
        probs, values = _per_step_heads(params, hs2, x, masks)
        T = x.shape[0]
        dh2 = np.zeros_like(hs2)
        for i in range(T):
            p = probs[i]
            a = int(actions[i])
            pa = max(p[a], 1e-300)
            logp = math.log(pa)
            valid = p > 0.0
            ent = -float(np.sum(p[valid] * np.log(p[valid])))
            verr = values[i] - q[i]
            loss += -w[i] * adv[i] * logp
            loss += 0.5 * config.value_weight * verr * verr
            loss += -config.entropy_bonus * ent
            value_loss_sum += 0.5 * verr * verr
            entropy_sum += ent

            dlogits = np.zeros_like(p)
            one_hot_grad = -w[i] * adv[i]
            dlogits[valid] += one_hot_grad * (-p[valid])
            dlogits[a] += one_hot_grad
            ent_grad = np.zeros_like(p)
            ent_grad[valid] = p[valid] * (np.log(p[valid]) + ent)
            dlogits += config.entropy_bonus * ent_grad
            dvalue = config.value_weight * verr

            grads["wa"] += np.outer(dlogits, hs2[i])
            grads["ws"] += np.outer(dlogits, x[i])
            grads["ba"] += dlogits
            grads["wv"] += dvalue * hs2[i]
            grads["bv"][0] += dvalue
            dh2[i] = t["wa"].T @ dlogits + dvalue * t["wv"]

        dwx2, dwh2, db2, dx2, _, _ = lstm_backward(
            hs1, hs2, l2[1], l2[2], l2[3], l2[4], l2[5], t["wx2"], t["wh2"], z0, z0, dh2
        )
        dwx1, dwh1, db1, _, _, _ = lstm_backward(
            x, hs1, l1[1], l1[2], l1[3], l1[4], l1[5], t["wx1"], t["wh1"], z0, z0, dx2
        )
        grads["wx2"] += dwx2
        grads["wh2"] += dwh2
        grads["b2"] += db2
        grads["wx1"] += dwx1
        grads["wh1"] += dwh1
        grads["b1"] += db1

    scale = 1.0 / max(total_steps, 1)
    loss *= scale
    for key in grads:
        grads[key] *= scale
    stats = {
        "value_loss": value_loss_sum * scale,
        "entropy": entropy_sum * scale,
    }
    return loss, grads, stats


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @staticmethod
    def for_params(params: PolicyParams) -> "AdamState":
        return AdamState(params.zero_grads(), params.zero_grads(), 0)


def adam_update(
    params: PolicyParams, grads: dict[str, np.ndarray], opt: AdamState, config: PolicyConfig
) -> PolicyParams:
    opt.step += 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    lr = config.learning_rate
    tensors = {}
    for key, g in grads.items():
        opt.m[key] = b1 * opt.m[key] + (1 - b1) * g
        opt.v[key] = b2 * opt.v[key] + (1 - b2) * (g * g)
        m_hat = opt.m[key] / (1 - b1**opt.step)
        v_hat = opt.v[key] / (1 - b2**opt.step)
        tensors[key] = params.tensors[key] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return PolicyParams(tensors, params.input_dim, params.hidden, params.actions)


def train_step(
    params: PolicyParams,
    pool: ReplayPool,
    opt: AdamState,
    config: PolicyConfig,
    rng: np.random.Generator,
    epsilon: float = 0.0,
) -> tuple[PolicyParams, TrainingMetrics]:
    """One off-policy update: sample whole episodes from the pool, weight
    them by the truncated importance ratio, take an Adam step on the
    clipped surrogate gradient."""
    if len(pool) < config.batch_episodes:
        raise PoolTooSmall(
            f"pool holds {len(pool)} episodes, batch needs {config.batch_episodes}"
        )
    batch = pool.sample(rng, config.batch_episodes)

    episodes = []
    advantages = []
    q_targets = []
    weights = []
    returns = []
    for ep in batch:
        x, masks, actions, rewards, behavior = _episode_arrays(ep)
        _, l2 = _forward_episode(params, x)
        probs, values = _per_step_heads(params, l2[0], x, masks)
        q = returns_to_go(rewards, config.gamma_rl)
        adv = q - values
        p_now = probs[np.arange(len(actions)), actions]
        rho = np.minimum(config.importance_clip, p_now / behavior)
        episodes.append((x, masks, actions))
        advantages.append(adv)
        q_targets.append(q)
        weights.append(rho)
        returns.append(float(rewards.sum()))

    if config.normalize_advantages:
        flat = np.concatenate(advantages)
        mu, sd = flat.mean(), flat.std()
        if sd > 1e-12:
            advantages = [(a - mu) / sd for a in advantages]
        else:
            advantages = [a - mu for a in advantages]

    loss, grads, stats = surrogate_loss_and_grads(
        params, episodes, advantages, q_targets, weights, config
    )
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonfiniteGradient(f"gradient for {key!r} is not finite")
        np.clip(g, -config.grad_clip, config.grad_clip, out=g)

    grad_norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    new_params = adam_update(params, grads, opt, config)
    metrics = TrainingMetrics(
        objective=float(np.mean(returns)),
        mean_advantage=float(np.mean(np.concatenate(advantages))),
        value_loss=stats["value_loss"],
        entropy=stats["entropy"],
        grad_norm=grad_norm,
        epsilon=epsilon,
    )
    return new_params, metrics
