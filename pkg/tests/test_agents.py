import math

import numpy as np
import pytest

from oracles import central_difference, gae_direct
from sliceforge.agents import load_checkpoint, make_agent, pretrain, save_checkpoint
from sliceforge.agents.dqn import (DqnAgent, DqnConfig, ReplayBuffer, compositions, dqn_select_action,
                                   dqn_update, td_targets)
from sliceforge.agents.ppo import (HALF_LOG_2PI, PpoAgent, PpoConfig, actor_loss_and_grads, clipped_surrogate,
                                   gae, gaussian_logprob, normalize_advantages, ppo_select_action, softmax)
from sliceforge.agents.state import STATE_DIM, build_state
from sliceforge.channel import channel_at
from sliceforge.control_loop import SlicingEnv, run_episode, surrogate_epoch
from sliceforge.domain import SliceKind, TrafficGenSpec, UeProfile
from sliceforge.neural import AdamState, CheckpointError, init_params
from sliceforge.scheduler import allocation_from_slices


# --- state ---------------------------------------------------------------

def test_state_features(cfg):
    active = (cfg.ue(0), cfg.ue(4), cfg.ue(8))
    ch = {u.ue_id: channel_at(u, 700, cfg) for u in active}
    s = build_state(active, ch, {4: 3e5}, {0: 0.0, 8: 8e5})
    assert s.shape == (STATE_DIM,)
    assert list(s[0:3]) == [1, 0, 0] and s[3] == 0.0
    assert s[8] == pytest.approx(0.06)
    assert s[13] == pytest.approx(8e5 / 5e6)


def test_link_loss_feature():
    from sliceforge.agents.state import link_loss_feature
    assert link_loss_feature(110) == pytest.approx(0.5)
    assert link_loss_feature(10) == 0.0 and link_loss_feature(1e4) == 2.0


# --- PPO pieces ----------------------------------------------------------

def test_select_action_limits():
    actor = init_params((STATE_DIM, 8, 3), np.random.default_rng(0))
    for w in actor.weights:
        w[...] = 0
    z, logp, fr = ppo_select_action(actor, np.full(3, -1e3), np.ones(STATE_DIM), np.random.default_rng(1))
    assert np.array_equal(z, np.zeros(3))
    z, logp, fr = ppo_select_action(actor, np.zeros(3), np.ones(STATE_DIM), None, deterministic=True)
    assert fr == pytest.approx([1 / 3] * 3)
    assert logp == pytest.approx(-2.757, abs=1e-3)
    assert gaussian_logprob(np.zeros(3), np.zeros(3), np.zeros(3)) == pytest.approx(-3 * HALF_LOG_2PI)


def test_softmax_sums_to_one():
    assert softmax(np.array([1000.0, 0.0, -1000.0])).sum() == pytest.approx(1.0)


def test_gae_examples():
    adv, ret = gae([1, 1], [0, 0, 0], 1.0, 1.0)
    assert list(adv) == [2, 1]
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=6), rng.normal(size=7)
    adv, _ = gae(r, v, 0.9, 0.0)
    assert adv == pytest.approx(r + 0.9 * v[1:] - v[:-1], abs=1e-14)


def test_gae_matches_direct_sum():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 17))
        r, v = rng.normal(size=n), rng.normal(size=n + 1)
        d = rng.random(n) < 0.2
        g, lam = rng.random(), rng.random()
        a1, r1 = gae(r, v, g, lam, d)
        a2, r2 = gae_direct(list(r), list(v), g, lam, list(d.astype(float)))
        assert np.max(np.abs(a1 - a2)) < 1e-10 and np.max(np.abs(r1 - r2)) < 1e-10


def test_clip_arithmetic():
    assert clipped_surrogate(np.array([1.5]), np.array([1.0]), 0.2)[0] == pytest.approx(1.2)
    assert clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)[0] == pytest.approx(-0.8)
    ratio = np.array([0.85, 1.0, 1.19])
    adv = np.array([2.0, -1.0, 0.3])
    assert np.array_equal(clipped_surrogate(ratio, adv, 0.2), ratio * adv)


def _actor_batch(seed=0, n=12):
    rng = np.random.default_rng(seed)
    actor = init_params((STATE_DIM, 16, 3), rng)
    log_std = np.full(3, -0.5)
    states = rng.normal(size=(n, STATE_DIM))
    z = rng.normal(size=(n, 3))
    return actor, log_std, states, z, rng


def test_ratio_is_one_when_policy_unchanged():
    actor, log_std, states, z, rng = _actor_batch()
    old = gaussian_logprob(z, actor(states), log_std)
    _, _, _, ratio = actor_loss_and_grads(actor, log_std, states, z, old, rng.normal(size=12), 0.2, 0.01)
    assert np.allclose(ratio, 1.0, atol=1e-12)


def test_actor_gradient_finite_differences():
    actor, log_std, states, z, rng = _actor_batch(3)
    # old log-probs a little away from the current policy, some inside some outside the clip band
    old = gaussian_logprob(z, actor(states), log_std) + rng.normal(0, 0.1, size=12)
    adv = rng.normal(size=12)

    def loss():
        return actor_loss_and_grads(actor, log_std, states, z, old, adv, 0.2, 0.01)[0]

    _, grads, g_ls, _ = actor_loss_and_grads(actor, log_std, states, z, old, adv, 0.2, 0.01)
    num = central_difference(loss, actor.params + [log_std], eps=1e-6)
    for a, n in zip(grads + [g_ls], num):
        assert np.allclose(a, n, atol=1e-6, rtol=1e-4)


def test_advantage_normalization():
    a = normalize_advantages(np.random.default_rng(0).normal(3, 5, size=256))
    assert abs(a.mean()) < 1e-9 and abs(a.std() - 1) < 1e-6


def test_ppo_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(gamma=1.5)


# --- DQN -----------------------------------------------------------------

def test_compositions_count():
    acts = compositions(13, 3)
    assert len(acts) == 105 and all(sum(a) == 13 for a in acts) and acts == sorted(acts)


def test_dqn_selection():
    q = init_params((STATE_DIM, 105), np.random.default_rng(0))
    q.weights[0][...] = 0
    q.biases[0][...] = 0
    s = np.zeros(STATE_DIM)
    assert dqn_select_action(q, s, 0.0, np.random.default_rng(0)) == 0
    q.biases[0][7] = 1.0
    assert dqn_select_action(q, s, 0.0, np.random.default_rng(0)) == 7
    rng = np.random.default_rng(1)
    picks = np.bincount([dqn_select_action(q, s, 1.0, rng) for _ in range(21_000)], minlength=105)
    assert picks.min() > 120 and picks.max() < 290


def test_td_targets():
    r = np.array([1.0, 2.0])
    nq = np.array([[5.0, 7.0], [1.0, 0.0]])
    assert list(td_targets(r, nq, np.array([1.0, 0.0]), 0.5)) == [1.0, 2.5]
    assert list(td_targets(r, nq, np.zeros(2), 0.0)) == [1.0, 2.0]


def test_target_sync_and_update():
    agent = DqnAgent(DqnConfig(), seed=0)
    rng = np.random.default_rng(0)
    buf = ReplayBuffer(100, STATE_DIM)
    for _ in range(80):
        buf.add(rng.normal(size=STATE_DIM), int(rng.integers(105)), -rng.random(), rng.normal(size=STATE_DIM), False)
    loss = dqn_update(agent.qnet, agent.target, buf.sample(64, rng), agent.cfg, AdamState(1e-3))
    assert math.isfinite(loss)
    agent.sync_target()
    probe = rng.normal(size=(5, STATE_DIM))
    assert np.array_equal(agent.qnet(probe), agent.target(probe))


def test_dqn_slice_prbs_cover_cell():
    agent = DqnAgent(seed=0)
    for a in range(len(agent.actions)):
        assert sum(agent.slice_prbs(a).values()) == 52


# --- pretraining and checkpoints ----------------------------------------

def test_pretrain_zero_steps_leaves_agent(cfg):
    agent = make_agent("ppo", seed=0)
    before = [p.copy() for p in agent.actor.params]
    pretrain(agent, SlicingEnv(cfg, surrogate=True), 0)
    assert all(np.array_equal(a, b) for a, b in zip(before, agent.actor.params))


def test_pretrain_is_deterministic(cfg):
    def run():
        a = make_agent("ppo", seed=3)
        pretrain(a, SlicingEnv(cfg, surrogate=True), 300)
        return a.actor.params
    assert all(np.array_equal(x, y) for x, y in zip(run(), run()))


def test_pretrain_needs_surrogate(cfg):
    with pytest.raises(ValueError):
        pretrain(make_agent("ppo"), SlicingEnv(cfg), 5)


def test_surrogate_favours_the_demanding_slice(cfg):
    heavy = TrafficGenSpec(SliceKind.URLLC, gen_freq=2.0, bytes_min=1_000_000, bytes_max=3_000_000)
    light_embb = TrafficGenSpec(SliceKind.EMBB, bitrate_min=2e4, bitrate_max=4e4)
    light_mmtc = TrafficGenSpec(SliceKind.MMTC, gen_freq=4.0, bytes_min=2_500, bytes_max=6_000)
    spec = {SliceKind.URLLC: heavy, SliceKind.EMBB: light_embb, SliceKind.MMTC: light_mmtc}
    ues = tuple(UeProfile(u.ue_id, u.slice, u.speed, u.initial_distance, spec[u.slice]) for u in cfg.ues)
    scen = cfg.replace(ues=ues)

    def reward(triple):
        env = SlicingEnv(scen, surrogate=True)
        obs = env.observe()
        alloc = allocation_from_slices(dict(zip(SliceKind, triple)), obs.active, obs.channels, 52)
        return surrogate_epoch(env, obs, alloc).reward.total

    assert reward((50, 1, 1)) >= reward((17, 17, 17))


@pytest.mark.parametrize("kind", ["ppo", "dqn"])
def test_checkpoint_round_trip(tmp_path, cfg, kind):
    agent = make_agent(kind, seed=1)
    run_episode(agent, SlicingEnv(cfg, surrogate=True), 300)
    path = save_checkpoint(agent, tmp_path / "ck.json")
    back = load_checkpoint(path, seed=1)
    for a in (agent, back):
        a.training = False
    env1, env2 = SlicingEnv(cfg), SlicingEnv(cfg)
    r1 = [r.allocation for r in run_episode(agent, env1, 8)]
    r2 = [r.allocation for r in run_episode(back, env2, 8)]
    assert r1 == r2


def test_checkpoint_version_rejected(tmp_path):
    p = tmp_path / "ck.json"
    p.write_text('{"format_version": 0, "agent": "ppo"}')
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_eval_mode_is_deterministic(cfg):
    agent = PpoAgent(seed=0)
    agent.training = False
    obs = SlicingEnv(cfg).observe()
    assert agent.allocate(obs) == agent.allocate(obs)
