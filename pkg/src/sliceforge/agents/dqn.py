"""DQN over a discrete menu of slice splits.

Actions are all ways of writing ``total_prbs / granularity`` units as an
ordered sum of three nonnegative parts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from ..domain import SLICES, rng_substream
from ..neural import (AdamState, Mlp, adam_from_dict, adam_step, adam_to_dict, backward, forward,
                      init_params, mlp_from_dict, mlp_to_dict)
from ..scheduler import PrbAllocation, allocation_from_slices
from .state import STATE_DIM, Observation


@dataclass
class DqnConfig:
    granularity: int = 4
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 5000
    replay_capacity: int = 50_000
    batch: int = 64
    gamma: float = 0.99
    target_sync: int = 500
    lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self) -> None:
        self.hidden = tuple(self.hidden)


def compositions(units: int, parts: int = 3) -> list[tuple[int, ...]]:
    """Ordered ``parts``-tuples of nonnegative ints summing to ``units``,
    in lexicographic order."""
    if parts == 1:
        return [(units,)]
    out = []
    for first in range(units + 1):
        out.extend((first, *rest) for rest in compositions(units - first, parts - 1))
    return out


def epsilon_at(step: int, cfg: DqnConfig) -> float:
    frac = min(1.0, step / cfg.eps_decay_steps) if cfg.eps_decay_steps > 0 else 1.0
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def dqn_select_action(qnet: Mlp, state: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; ``np.argmax`` already breaks ties toward index 0."""
    n_actions = qnet.layer_dims[-1]
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(n_actions))
    return int(np.argmax(forward(qnet, state)[0]))


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.d = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self._next
        self.s[i], self.a[i], self.r[i], self.s2[i], self.d[i] = s, a, r, s2, float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.d[idx]


def td_targets(rewards: np.ndarray, next_q_target: np.ndarray, dones: np.ndarray,
               gamma: float) -> np.ndarray:
    return rewards + gamma * (1.0 - dones) * next_q_target.max(axis=1)


def dqn_update(qnet: Mlp, target_net: Mlp, batch, cfg: DqnConfig, opt: AdamState) -> float:
    """One Adam step on the squared TD error of the taken actions."""
    s, a, r, s2, d = batch
    y = td_targets(r, forward(target_net, s2)[0], d, cfg.gamma)
    q, cache = forward(qnet, s)
    rows = np.arange(s.shape[0])
    err = q[rows, a] - y
    g = np.zeros_like(q)
    g[rows, a] = 2.0 * err / s.shape[0]
    adam_step(qnet.params, backward(qnet, cache, g), opt)
    return float(np.mean(err ** 2))


class DqnAgent:
    kind = "dqn"
    learning = True

    def __init__(self, cfg: DqnConfig | None = None, seed: int = 0, total_prbs: int = 52,
                 state_dim: int = STATE_DIM):
        self.cfg = cfg or DqnConfig()
        self.seed = seed
        self.total_prbs = total_prbs
        self.actions = compositions(total_prbs // self.cfg.granularity, len(SLICES))
        rng = rng_substream(seed, "agent", 0)
        self.qnet = init_params((state_dim, *self.cfg.hidden, len(self.actions)), rng)
        self.target = self.qnet.copy()
        self.opt = AdamState(self.cfg.lr)
        self.replay = ReplayBuffer(self.cfg.replay_capacity, state_dim)
        self.explore_rng = rng_substream(seed, "exploration", 0)
        self.batch_rng = rng_substream(seed, "agent", 1)
        self.training = True
        self.steps = 0
        self.grad_steps = 0
        self.history: list[dict[str, float]] = []
        self._pending: tuple[np.ndarray, int] | None = None
        self._recent: list[tuple[float, float]] = []

    @property
    def name(self) -> str:
        return "dqn"

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.steps, self.cfg) if self.training else 0.0

    def slice_prbs(self, action: int) -> dict:
        counts = [u * self.cfg.granularity for u in self.actions[action]]
        # granularity leftovers join the largest share
        counts[int(np.argmax(counts))] += self.total_prbs - sum(counts)
        return dict(zip(SLICES, counts))

    def allocate(self, obs: Observation) -> PrbAllocation:
        a = dqn_select_action(self.qnet, obs.state, self.epsilon, self.explore_rng)
        if self.training:
            self._pending = (obs.state.copy(), a)
        return allocation_from_slices(self.slice_prbs(a), obs.active, obs.channels, obs.cfg.total_prbs)

    def feedback(self, obs: Observation, reward: float, done: bool,
                 next_obs: Observation | None) -> None:
        if not self.training or self._pending is None:
            return
        s, a = self._pending
        self._pending = None
        s2 = next_obs.state if next_obs is not None else np.zeros_like(s)
        self.replay.add(s, a, reward, s2, done or next_obs is None)
        self.steps += 1
        loss = math.nan
        if len(self.replay) >= self.cfg.batch:
            loss = dqn_update(self.qnet, self.target, self.replay.sample(self.cfg.batch, self.batch_rng),
                              self.cfg, self.opt)
            self.grad_steps += 1
            if self.grad_steps % self.cfg.target_sync == 0:
                self.sync_target()
        self._recent.append((float(reward), loss))
        if len(self._recent) == 256:
            losses = [x for _, x in self._recent if not math.isnan(x)]
            self.history.append({
                "step": self.steps,
                "mean_reward": float(np.mean([r for r, _ in self._recent])),
                "actor_loss": math.nan,
                "critic_loss": float(np.mean(losses)) if losses else math.nan,
                "epsilon": self.epsilon,
                "replay_size": len(self.replay),
            })
            self._recent = []

    def sync_target(self) -> None:
        self.target.load_from(self.qnet)

    def to_dict(self) -> dict[str, Any]:
        return {
            "qnet": mlp_to_dict(self.qnet),
            "target": mlp_to_dict(self.target),
            "optimizer": adam_to_dict(self.opt),
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.cfg).items()},
            "total_prbs": self.total_prbs,
            "steps": self.steps,
            "grad_steps": self.grad_steps,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any], seed: int = 0) -> "DqnAgent":
        agent = cls(DqnConfig(**doc["config"]), seed=seed, total_prbs=int(doc["total_prbs"]))
        agent.qnet = mlp_from_dict(doc["qnet"])[0]
        agent.target = mlp_from_dict(doc["target"])[0]
        agent.opt = adam_from_dict(doc["optimizer"], agent.qnet.params)
        agent.steps = int(doc.get("steps", 0))
        agent.grad_steps = int(doc.get("grad_steps", 0))
        return agent
