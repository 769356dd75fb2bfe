"""PPO actor-critic over a continuous slice-share action.

The actor outputs the mean of a diagonal Gaussian over three logits; a
softmax of the sampled logits gives the slice fractions, which largest
remainder rounding turns into PRB counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from ..domain import rng_substream
from ..neural import (AdamState, Mlp, adam_from_dict, adam_step, adam_to_dict, backward,
                      clip_grad_norm, forward, init_params, mlp_from_dict, mlp_to_dict)
from ..scheduler import PrbAllocation, allocation_from_slices, fractions_to_slice_prbs
from .state import STATE_DIM, Observation

log = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
N_LOGITS = 3


@dataclass
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    rollout_length: int = 256
    update_epochs: int = 4
    minibatch: int = 64
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    init_log_std: float = -0.5
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self) -> None:
        self.hidden = tuple(self.hidden)
        if not (0 <= self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ValueError("gamma and lambda must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip epsilon must be positive")


@dataclass
class Transition:
    state: np.ndarray
    action_logits: np.ndarray
    logprob: float
    value: float
    reward: float
    done: bool


@dataclass
class LossReport:
    actor_loss_pre: float = math.nan
    actor_loss_post: float = math.nan
    critic_loss_pre: float = math.nan
    critic_loss_post: float = math.nan
    mean_ratio: float = math.nan
    entropy: float = math.nan
    aborted: bool = False


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def gaussian_logprob(z: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Summed log density of a diagonal Gaussian along the last axis."""
    var = np.exp(2.0 * log_std)
    sq = (z - mu) ** 2
    # a zero residual contributes nothing even as the variance collapses to 0
    quad = np.divide(sq, var, out=np.zeros(np.broadcast(sq, var).shape), where=sq != 0)
    return np.sum(-0.5 * quad - log_std - HALF_LOG_2PI, axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(0.5 + HALF_LOG_2PI + log_std))


def ppo_select_action(actor: Mlp, log_std: np.ndarray, state: np.ndarray,
                      rng: np.random.Generator | None, deterministic: bool = False
                      ) -> tuple[np.ndarray, float, np.ndarray]:
    """Sample logits ``z ~ N(mu(s), diag(exp(2 log_std)))``.

    Returns ``(z, logprob(z), softmax(z))``; deterministic mode uses the mean.
    """
    mu = forward(actor, state)[0]
    if deterministic or rng is None:
        z = mu.copy()
    else:
        z = mu + np.exp(log_std) * rng.standard_normal(mu.shape)
    return z, float(gaussian_logprob(z, mu, log_std)), softmax(z)


def gae(rewards: Sequence[float], values: Sequence[float], gamma: float, lam: float,
        dones: Sequence[bool] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates by backward recursion.

    ``values`` carries one extra bootstrap entry for the state after the
    last reward.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] != r.shape[0] + 1:
        raise ValueError(f"need {r.shape[0] + 1} values, got {v.shape[0]}")
    d = np.zeros_like(r) if dones is None else np.asarray(dones, dtype=np.float64)
    if d.shape != r.shape:
        raise ValueError("dones length differs from rewards")
    adv = np.zeros_like(r)
    running = 0.0
    for t in range(r.shape[0] - 1, -1, -1):
        nonterminal = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * nonterminal - v[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + v[:-1]


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample ``min(rho*A, clip(rho, 1-eps, 1+eps)*A)``."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def actor_loss_and_grads(actor: Mlp, log_std: np.ndarray, states: np.ndarray, z: np.ndarray,
                         old_logp: np.ndarray, adv: np.ndarray, clip_eps: float,
                         entropy_coef: float) -> tuple[float, list[np.ndarray], np.ndarray, np.ndarray]:
    """Clipped-surrogate loss with entropy bonus and its exact gradients.

    Returns ``(loss, actor param grads, log_std grad, ratios)``.
    """
    n = states.shape[0]
    mu, cache = forward(actor, states)
    sigma2 = np.exp(2.0 * log_std)
    logp = gaussian_logprob(z, mu, log_std)
    ratio = np.exp(logp - old_logp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    ent = gaussian_entropy(log_std)
    loss = -float(np.mean(np.minimum(unclipped, clipped))) - entropy_coef * ent

    # gradient only through samples where the unclipped term is the minimum
    active = unclipped <= clipped
    g_logp = np.where(active, -adv * ratio / n, 0.0)
    diff = z - mu
    g_mu = g_logp[:, None] * diff / sigma2
    g_log_std = (g_logp[:, None] * (diff ** 2 / sigma2 - 1.0)).sum(axis=0) - entropy_coef
    grads = backward(actor, cache, g_mu)
    return loss, grads, g_log_std, ratio


def critic_loss_and_grads(critic: Mlp, states: np.ndarray, returns: np.ndarray
                          ) -> tuple[float, list[np.ndarray]]:
    v, cache = forward(critic, states)
    err = v[:, 0] - returns
    loss = float(np.mean(err ** 2))
    grads = backward(critic, cache, (2.0 * err / states.shape[0])[:, None])
    return loss, grads


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-12 else 1.0)


class PpoAgent:
    """Online PPO learner behind the common policy interface."""

    kind = "ppo"
    learning = True

    def __init__(self, cfg: PpoConfig | None = None, seed: int = 0, state_dim: int = STATE_DIM):
        self.cfg = cfg or PpoConfig()
        self.seed = seed
        init_rng = rng_substream(seed, "agent", 0)
        dims = (state_dim, *self.cfg.hidden)
        self.actor = init_params((*dims, N_LOGITS), init_rng)
        self.critic = init_params((*dims, 1), init_rng)
        self.log_std = np.full(N_LOGITS, float(self.cfg.init_log_std))
        self.actor_opt = AdamState(self.cfg.actor_lr)
        self.critic_opt = AdamState(self.cfg.critic_lr)
        self.explore_rng = rng_substream(seed, "exploration", 0)
        self.batch_rng = rng_substream(seed, "agent", 1)
        self.training = True
        self.buffer: list[Transition] = []
        self.steps = 0
        self.updates = 0
        self.history: list[dict[str, float]] = []
        self._pending: tuple[np.ndarray, np.ndarray, float, float] | None = None

    @property
    def name(self) -> str:
        return "ppo"

    # --- policy interface ------------------------------------------------

    def allocate(self, obs: Observation) -> PrbAllocation:
        state = obs.state
        z, logp, fractions = ppo_select_action(self.actor, self.log_std, state, self.explore_rng,
                                               deterministic=not self.training)
        if self.training:
            value = float(forward(self.critic, state)[0][0])
            self._pending = (state.copy(), z, logp, value)
        counts = fractions_to_slice_prbs(_renormalize(fractions), obs.cfg.total_prbs)
        return allocation_from_slices(counts, obs.active, obs.channels, obs.cfg.total_prbs)

    def feedback(self, obs: Observation, reward: float, done: bool,
                 next_obs: Observation | None) -> None:
        if not self.training or self._pending is None:
            return
        state, z, logp, value = self._pending
        self._pending = None
        self.buffer.append(Transition(state, z, logp, value, float(reward), bool(done)))
        self.steps += 1
        if len(self.buffer) >= self.cfg.rollout_length:
            bootstrap = 0.0
            if not done and next_obs is not None:
                bootstrap = float(forward(self.critic, next_obs.state)[0][0])
            report = self.update(bootstrap)
            self.history.append({
                "step": self.steps,
                "mean_reward": float(np.mean([t.reward for t in self.buffer])),
                "actor_loss": report.actor_loss_post,
                "critic_loss": report.critic_loss_post,
                "epsilon": math.nan,
            })
            self.buffer.clear()

    # --- learning --------------------------------------------------------

    def update(self, bootstrap_value: float = 0.0) -> LossReport:
        batch = self.buffer
        values = [t.value for t in batch] + [bootstrap_value]
        adv, returns = gae([t.reward for t in batch], values, self.cfg.gamma, self.cfg.lam,
                           [t.done for t in batch])
        report = ppo_update(self, batch, normalize_advantages(adv), returns, self.cfg, self.batch_rng,
                            batch_id=self.updates)
        self.updates += 1
        return report

    # --- persistence -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "actor": mlp_to_dict(self.actor),
            "critic": mlp_to_dict(self.critic),
            "actor_optimizer": adam_to_dict(self.actor_opt),
            "critic_optimizer": adam_to_dict(self.critic_opt),
            "log_std": [float(x) for x in self.log_std],
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.cfg).items()},
            "steps": self.steps,
            "updates": self.updates,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any], seed: int = 0) -> "PpoAgent":
        agent = cls(PpoConfig(**doc["config"]), seed=seed)
        agent.actor = mlp_from_dict(doc["actor"])[0]
        agent.critic = mlp_from_dict(doc["critic"])[0]
        agent.log_std = np.asarray(doc["log_std"], dtype=np.float64)
        if "actor_optimizer" in doc:
            agent.actor_opt = adam_from_dict(doc["actor_optimizer"], agent.actor.params + [agent.log_std])
            agent.critic_opt = adam_from_dict(doc["critic_optimizer"], agent.critic.params)
        agent.steps = int(doc.get("steps", 0))
        agent.updates = int(doc.get("updates", 0))
        return agent


def _renormalize(fr: np.ndarray) -> list[float]:
    fr = np.clip(np.asarray(fr, dtype=np.float64), 0.0, None)
    fr = fr / fr.sum()
    out = [float(x) for x in fr]
    # push float residue onto the largest share so the sum is 1 within 1e-9
    out[int(np.argmax(fr))] += 1.0 - sum(out)
    return [max(0.0, x) for x in out]


def ppo_update(agent: PpoAgent, batch: Sequence[Transition], advantages: np.ndarray,
               returns: np.ndarray, cfg: PpoConfig, rng: np.random.Generator,
               batch_id: int = 0) -> LossReport:
    """Several epochs of minibatch Adam steps on the clipped surrogate and the
    value regression. A non-finite loss abandons the whole update."""
    states = np.stack([t.state for t in batch])
    z = np.stack([t.action_logits for t in batch])
    old_logp = np.array([t.logprob for t in batch])
    adv = np.asarray(advantages, dtype=np.float64)
    ret = np.asarray(returns, dtype=np.float64)
    n = states.shape[0]
    rep = LossReport()

    a_loss, _, _, ratio = actor_loss_and_grads(agent.actor, agent.log_std, states, z, old_logp, adv,
                                               cfg.clip_eps, cfg.entropy_coef)
    c_loss, _ = critic_loss_and_grads(agent.critic, states, ret)
    rep.actor_loss_pre, rep.critic_loss_pre = a_loss, c_loss
    if not (math.isfinite(a_loss) and math.isfinite(c_loss)):
        log.warning("non-finite PPO loss on batch %d; update skipped", batch_id)
        rep.aborted = True
        return rep

    for _ in range(cfg.update_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            la, ga, gls, _ = actor_loss_and_grads(agent.actor, agent.log_std, states[idx], z[idx],
                                                  old_logp[idx], adv[idx], cfg.clip_eps, cfg.entropy_coef)
            lc, gc = critic_loss_and_grads(agent.critic, states[idx], ret[idx])
            if not (math.isfinite(la) and math.isfinite(lc)):
                log.warning("non-finite PPO loss on batch %d; update aborted", batch_id)
                rep.aborted = True
                return rep
            actor_grads = ga + [gls]
            clip_grad_norm(actor_grads, cfg.max_grad_norm)
            adam_step(agent.actor.params + [agent.log_std], actor_grads, agent.actor_opt)
            clip_grad_norm(gc, cfg.max_grad_norm)
            adam_step(agent.critic.params, gc, agent.critic_opt)

    a_loss, _, _, ratio = actor_loss_and_grads(agent.actor, agent.log_std, states, z, old_logp, adv,
                                               cfg.clip_eps, cfg.entropy_coef)
    rep.actor_loss_post = a_loss
    rep.critic_loss_post = critic_loss_and_grads(agent.critic, states, ret)[0]
    rep.mean_ratio = float(np.mean(ratio))
    rep.entropy = gaussian_entropy(agent.log_std)
    return rep
