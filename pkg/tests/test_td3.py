import math

import numpy as np
import pytest

from seacollect import (
    CheckpointError,
    ConfigError,
    MissionConfig,
    MissionEnv,
    Mlp,
    ReplayBuffer,
    SeaConfig,
    Td3Agent,
    Td3Hyper,
    Transition,
    convergence_episode,
    load_checkpoint,
    moving_average,
    restore_agent,
    save_checkpoint,
    soft_update,
    train,
)

HYPER = Td3Hyper()


def toy_agent(state_dim=3, hidden=8, seed=0, **kw):
    hyper = Td3Hyper(hidden=hidden, batch=4, buffer_capacity=64, **kw)
    return Td3Agent(state_dim, 2, hyper, np.random.default_rng(seed))


def numeric_grads(param_list, loss_fn, h=1e-5):
    grads = []
    for p in param_list:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            hi = loss_fn()
            p[idx] = old - h
            lo = loss_fn()
            p[idx] = old
            g[idx] = (hi - lo) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def rel_err(a, b):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / scale


# -- network forward/backward --------------------------------------------

def test_zero_actor_outputs_zero():
    net = Mlp([4, 8, 8, 8, 2], out_tanh=True, rng=None)
    out = net.forward(np.zeros(4))
    assert np.all(out == 0.0)


def test_actor_forward_deterministic_and_saturating():
    agent = toy_agent()
    rng = np.random.default_rng(1)
    s = rng.normal(size=3)
    a1 = agent.actor_forward(s)
    a2 = agent.actor_forward(s)
    assert np.array_equal(a1, a2)
    for _ in range(1000):
        out = agent.actor_forward(rng.normal(scale=5.0, size=3))
        assert np.all(np.abs(out) <= 1.0)


def test_dimension_mismatch_rejected():
    agent = toy_agent()
    with pytest.raises(ConfigError):
        agent.actor_forward(np.zeros(5))


def test_critic_gradients_match_finite_differences():
    agent = toy_agent(seed=3)
    rng = np.random.default_rng(7)
    s = rng.normal(size=(4, 3))
    a = rng.uniform(-1, 1, size=(4, 2))
    y = rng.normal(size=4)
    x = np.concatenate([s, a], axis=1)
    net = agent.critic1

    pred, cache = net.forward_cached(x)
    err = pred[:, 0] - y
    grad_out = (2.0 / err.size) * err[:, None]
    _, analytic = net.backward(cache, grad_out)

    def loss():
        out = net.forward(x)
        return float(np.mean((out[:, 0] - y) ** 2))

    numeric = numeric_grads(net.parameters(), loss)
    for g_a, g_n in zip(analytic, numeric):
        assert rel_err(g_a, g_n) < 1e-4


def test_actor_gradients_match_finite_differences():
    agent = toy_agent(seed=4)
    rng = np.random.default_rng(9)
    s = rng.normal(size=(4, 3))

    actor, critic = agent.actor, agent.critic1
    a, cache_a = actor.forward_cached(s)
    q, cache_q = critic.forward_cached(np.concatenate([s, a], axis=1))
    grad_q = np.full_like(q, -1.0 / q.shape[0])  # descend on -mean(Q)
    grad_x, _ = critic.backward(cache_q, grad_q)
    _, analytic = actor.backward(cache_a, grad_x[:, 3:])

    def neg_objective():
        act = actor.forward(s)
        return -float(np.mean(critic.forward(np.concatenate([s, act], axis=1))))

    numeric = numeric_grads(actor.parameters(), neg_objective)
    for g_a, g_n in zip(analytic, numeric):
        assert rel_err(g_a, g_n) < 1e-4


def test_critic_update_is_noop_at_optimum():
    agent = toy_agent(seed=5)
    rng = np.random.default_rng(11)
    s = rng.normal(size=(4, 3))
    a = rng.uniform(-1, 1, size=(4, 2))
    x = np.concatenate([s, a], axis=1)
    y = agent.critic1.forward(x)[:, 0].copy()
    before = [p.copy() for p in agent.critic1.parameters()]
    l1, _ = agent.update_critics(s, a, y)
    assert l1 == 0.0
    for p, b in zip(agent.critic1.parameters(), before):
        assert np.array_equal(p, b)


def test_critic_loss_decreases_on_fixed_batch():
    agent = toy_agent(seed=6)
    rng = np.random.default_rng(13)
    s = rng.normal(size=(8, 3))
    a = rng.uniform(-1, 1, size=(8, 2))
    y = rng.normal(size=8) * 3.0
    losses = [agent.update_critics(s, a, y)[0] for _ in range(100)]
    assert all(x > y_ for x, y_ in zip(losses, losses[1:]))


def test_actor_objective_nondecreasing_with_frozen_critic():
    agent = toy_agent(seed=8)
    rng = np.random.default_rng(17)
    s = rng.normal(size=(16, 3))
    objs = [agent.update_actor(s) for _ in range(50)]
    assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))


def test_constant_critic_gives_zero_actor_gradient():
    agent = toy_agent(seed=9)
    # zero all critic weights: output constant (bias only), dQ/da = 0
    for w in agent.critic1.weights:
        w[:] = 0.0
    agent.critic1.biases[-1][:] = 5.0
    before = [p.copy() for p in agent.actor.parameters()]
    agent.update_actor(np.random.default_rng(19).normal(size=(4, 3)))
    for p, b in zip(agent.actor.parameters(), before):
        assert np.array_equal(p, b)


# -- TD3 target machinery ---------------------------------------------------

def test_select_action_zero_noise_equals_forward():
    agent = toy_agent()
    s = np.array([0.3, -0.2, 0.9])
    a = agent.select_action(s, np.random.default_rng(0), explore_sigma=0.0)
    assert np.array_equal(a, agent.actor_forward(s))


def test_select_action_clamped():
    agent = toy_agent()
    s = np.array([0.3, -0.2, 0.9])
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = agent.select_action(s, rng, explore_sigma=2.0)
        assert np.all(np.abs(a) <= 1.0)


def test_exploration_noise_scale():
    agent = toy_agent()
    rng = np.random.default_rng(23)
    s = np.zeros(3)
    base = agent.actor_forward(s)
    draws = np.array(
        [agent.select_action(s, rng, explore_sigma=0.1) - base for _ in range(10_000)]
    )
    # clipping is inactive for small noise around a mid-range action
    assert abs(draws[:, 0].std() - 0.1) / 0.1 < 0.05


def test_target_action_noise_bounded():
    agent = toy_agent(target_noise_sigma=0.5, target_noise_clip=0.3)
    rng = np.random.default_rng(29)
    s = rng.normal(size=(256, 3))
    base = np.clip(agent.actor_target.forward(s), -1, 1)
    for _ in range(20):
        a = agent.target_action(s, rng)
        assert np.all(np.abs(a) <= 1.0)
    # zero sigma degenerates to the target actor output
    calm = toy_agent(target_noise_sigma=0.0)
    a = calm.target_action(s, rng)
    assert np.array_equal(a, np.clip(calm.actor_target.forward(s), -1, 1))


def test_compute_target_arithmetic():
    agent = toy_agent(seed=10)
    agent.hyper = Td3Hyper(hidden=8, batch=4, buffer_capacity=64, target_noise_sigma=0.0)
    # force constant critic outputs 2 and 3
    for net, value in ((agent.critic1_target, 2.0), (agent.critic2_target, 3.0)):
        for w in net.weights:
            w[:] = 0.0
        for b in net.biases:
            b[:] = 0.0
        net.biases[-1][:] = value
    rng = np.random.default_rng(0)
    y = agent.compute_target(np.array([1.0]), np.array([0.0]), np.zeros((1, 3)), rng)
    assert y[0] == pytest.approx(1.0 + 0.97 * 2.0)
    y_term = agent.compute_target(np.array([1.0]), np.array([1.0]), np.zeros((1, 3)), rng)
    assert y_term[0] == 1.0


def test_min_target_lower_bound_property():
    agent = toy_agent(seed=12)
    rng = np.random.default_rng(31)
    r = rng.normal(size=64)
    d = (rng.uniform(size=64) < 0.1).astype(float)
    s2 = rng.normal(size=(64, 3))
    y, q1, q2, _ = agent.compute_target(r, d, s2, rng, return_parts=True)
    assert np.all(y <= r + (1 - d) * 0.97 * q1 + 1e-12)
    assert np.all(y <= r + (1 - d) * 0.97 * q2 + 1e-12)


def test_soft_update_endpoints_and_midpoint():
    a = Mlp([2, 4, 1], out_tanh=False, rng=np.random.default_rng(1))
    b = Mlp([2, 4, 1], out_tanh=False, rng=np.random.default_rng(2))
    t = a.clone()
    soft_update(t, b, tau=1.0)
    for p, q in zip(t.parameters(), b.parameters()):
        assert np.allclose(p, q)
    t = a.clone()
    soft_update(t, b, tau=0.0)
    for p, q in zip(t.parameters(), a.parameters()):
        assert np.array_equal(p, q)
    t = a.clone()
    for p in t.parameters():
        p[:] = 0.0
    two = a.clone()
    for p in two.parameters():
        p[:] = 2.0
    soft_update(t, two, tau=0.5)
    for p in t.parameters():
        assert np.all(p == 1.0)


# -- replay buffer ------------------------------------------------------------

def test_buffer_ring_overwrite_and_capacity():
    buf = ReplayBuffer(8, 3, 2)
    for i in range(20):
        buf.add(Transition(np.full(3, i), np.zeros(2), float(i), np.zeros(3), 0.0))
    assert len(buf) == 8
    assert set(buf.r.tolist()) == set(range(12, 20))


def test_buffer_sampling_without_replacement():
    buf = ReplayBuffer(16, 1, 1)
    for i in range(16):
        buf.add(Transition(np.array([i]), np.array([0.0]), float(i), np.array([0.0]), 0.0))
    rng = np.random.default_rng(3)
    _, _, r, _, _ = buf.sample(16, rng)
    assert sorted(r.tolist()) == list(range(16))
    with pytest.raises(ConfigError):
        ReplayBuffer(4, 1, 1).sample(2, rng)


# -- checkpoints --------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path):
    agent = toy_agent(seed=14)
    path = tmp_path / "ck.bin"
    save_checkpoint(path, agent, seed=99)
    twin = restore_agent(path, agent.hyper)
    rng = np.random.default_rng(41)
    for _ in range(100):
        s = rng.normal(size=3)
        assert np.array_equal(agent.actor_forward(s), twin.actor_forward(s))
    header, arrays = load_checkpoint(path)
    assert header["seed"] == 99
    assert header["state_dim"] == 3


def test_checkpoint_truncation_rejected(tmp_path):
    agent = toy_agent(seed=15)
    path = tmp_path / "ck.bin"
    save_checkpoint(path, agent, seed=1)
    data = path.read_bytes()
    path.write_bytes(data[:-17])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"junk")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_width_mismatch_rejected(tmp_path):
    agent = toy_agent(state_dim=8, seed=16)  # two-agent state width
    path = tmp_path / "ck.bin"
    save_checkpoint(path, agent, seed=1)
    with pytest.raises(CheckpointError):
        restore_agent(path, agent.hyper, expect_state_dim=12)  # four-agent width


# -- convergence rule -----------------------------------------------------

def test_convergence_detector_on_ramp_then_plateau():
    values = list(np.linspace(-100, -10, 120)) + [-10.0] * 120
    ep = convergence_episode(values, window=25, slope_tol=0.2, run_length=50)
    assert ep is not None
    assert 120 <= ep <= 220
    # a steady ramp never fires: slope of the smoothed series stays 0.75
    assert convergence_episode(np.linspace(-100, 80, 240)) is None
    # too-short series never fires
    assert convergence_episode([-5.0] * 60) is None


def test_moving_average_window():
    ma = moving_average([1.0] * 30, 25)
    assert ma.shape == (6,)
    assert np.allclose(ma, 1.0)


# -- training loop -------------------------------------------------------

def tiny_env():
    cfg = MissionConfig(x_max=50.0, y_max=50.0, n_poi=4, n_auv=1, episode_steps=40,
                        collision_dist=8.0, comm_range=12.0)
    return MissionEnv(cfg, sea=SeaConfig(enabled=False), usv_mode="fixed",
                      usv_fixed=(25.0, 25.0))


def test_train_update_ratio_and_buffer_bound():
    env = tiny_env()
    hyper = Td3Hyper(hidden=16, batch=8, buffer_capacity=200, warmup_steps=50,
                     episodes=4, steps_per_episode=40, policy_delay=2)
    result = train(env, hyper, seed=0)
    agent = result.agent
    assert agent.critic_updates == result.env_steps - hyper.warmup_steps
    assert agent.actor_updates == agent.critic_updates // hyper.policy_delay
    assert result.env_steps == 160
    assert len(result.curves["arpt"]) == 4


def test_train_seed_determinism():
    h = Td3Hyper(hidden=16, batch=8, buffer_capacity=200, warmup_steps=50,
                 episodes=3, steps_per_episode=40)
    r1 = train(tiny_env(), h, seed=7)
    r2 = train(tiny_env(), h, seed=7)
    assert r1.curves == r2.curves
    for p, q in zip(r1.agent.actor.parameters(), r2.agent.actor.parameters()):
        assert np.array_equal(p, q)
