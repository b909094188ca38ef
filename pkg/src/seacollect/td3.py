"""Self-contained twin-critic deterministic policy learner.

Everything runs on plain numpy in double precision: feed-forward networks
with hand-written backpropagation, a ring replay buffer, clipped double-Q
targets with smoothed target actions, delayed actor updates and soft target
blending.  One shared policy drives all agents on their own observation
vectors; transitions from every agent land in one buffer.

The networks follow the fixed recipe: actor ``in -> 128 -> 128 -> 128 -> 2``
with a saturating tanh output, critics ``(state+action) -> 128 -> 128 -> 1``
linear, rectifier hidden activations, parameters initialized uniformly in
``+-1/sqrt(fan_in)``.  Plain stochastic gradient descent is the default
optimizer; adaptive moments can be switched on per config.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, TrainingFault
from .mission_env import MissionEnv


@dataclass(frozen=True)
class Td3Hyper:
    gamma: float = 0.97
    tau: float = 1e-3
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    batch: int = 64
    policy_delay: int = 2
    target_noise_sigma: float = 0.1
    target_noise_clip: float = 1.0
    explore_sigma: float = 0.1
    warmup_steps: int = 1000
    episodes: int = 450
    steps_per_episode: int = 1000
    hidden: int = 128
    buffer_capacity: int = 20_000
    optimizer: str = "sgd"

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"discount must lie in [0, 1), got {self.gamma}")
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError(f"soft-update rate must lie in (0, 1], got {self.tau}")
        if self.policy_delay < 1:
            raise ConfigError("policy delay must be >= 1")
        if self.batch < 1 or self.buffer_capacity < self.batch:
            raise ConfigError("need buffer capacity >= batch size >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.explore_sigma < 0 or self.target_noise_sigma < 0 or self.target_noise_clip < 0:
            raise ConfigError("noise scales must be non-negative")


def hyper_hash(hyper: Td3Hyper) -> str:
    payload = json.dumps(asdict(hyper), sort_keys=True).encode()
    return hashlib.md5(payload).hexdigest()


class Mlp:
    """Fully connected net; rectifier hidden layers, optional tanh output."""

    def __init__(self, sizes: list[int], out_tanh: bool, rng: np.random.Generator | None):
        self.sizes = list(sizes)
        self.out_tanh = out_tanh
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            if rng is None:
                self.weights.append(np.zeros((fan_in, fan_out)))
                self.biases.append(np.zeros(fan_out))
            else:
                self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
                self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cached(x)[0]

    def forward_cached(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ConfigError(f"input width {x.shape[1]} != expected {self.in_dim}")
        inputs = [x]
        pre: list[np.ndarray] = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_tanh:
                h = np.tanh(z)
            else:
                h = z
            inputs.append(h)
        return h, (inputs, pre)

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of a scalar loss given d loss / d output.

        Returns (grad_input, grads) where grads interleaves weight and bias
        gradients in ``parameters()`` order.  Does not modify parameters.
        """
        inputs, pre = cache
        last = len(self.weights) - 1
        grads_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grads_b: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        if self.out_tanh:
            out = inputs[-1]
            delta = grad_out * (1.0 - out * out)
        else:
            delta = np.asarray(grad_out, dtype=np.float64)
        for i in range(last, -1, -1):
            grads_w[i] = inputs[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * (pre[i - 1] > 0.0)
        grads: list[np.ndarray] = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return delta, grads

    def clone(self) -> "Mlp":
        twin = Mlp(self.sizes, self.out_tanh, rng=None)
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Elementwise convex blend of online parameters into the target net."""
    for t, o in zip(target.parameters(), online.parameters()):
        if t.shape != o.shape:
            raise ConfigError("target/online parameter shape mismatch")
        t *= 1.0 - tau
        t += tau * o


class _Optimizer:
    def __init__(self, kind: str, params: list[np.ndarray], lr: float):
        self.kind = kind
        self.lr = lr
        self.t = 0
        if kind == "adam":
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.lr * g
            return
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        correct = math.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * correct * m / (np.sqrt(v) + eps)


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: float


class ReplayBuffer:
    """Fixed-capacity ring; uniform without-replacement batch sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.d = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> None:
        i = self.cursor
        self.s[i] = tr.s
        self.a[i] = tr.a
        self.r[i] = tr.r
        self.s2[i] = tr.s_next
        self.d[i] = tr.done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if batch > self.size:
            raise ConfigError(f"cannot sample {batch} of {self.size} stored transitions")
        idx = rng.choice(self.size, size=batch, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.d[idx]


class Td3Agent:
    """Shared actor, twin critics, their targets, and the update rules."""

    def __init__(self, state_dim: int, action_dim: int, hyper: Td3Hyper,
                 rng: np.random.Generator):
        h = hyper.hidden
        self.hyper = hyper
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.actor = Mlp([state_dim, h, h, h, action_dim], out_tanh=True, rng=rng)
        self.critic1 = Mlp([state_dim + action_dim, h, h, 1], out_tanh=False, rng=rng)
        self.critic2 = Mlp([state_dim + action_dim, h, h, 1], out_tanh=False, rng=rng)
        self.actor_target = self.actor.clone()
        self.critic1_target = self.critic1.clone()
        self.critic2_target = self.critic2.clone()
        self._opt_actor = _Optimizer(hyper.optimizer, self.actor.parameters(), hyper.lr_actor)
        self._opt_c1 = _Optimizer(hyper.optimizer, self.critic1.parameters(), hyper.lr_critic)
        self._opt_c2 = _Optimizer(hyper.optimizer, self.critic2.parameters(), hyper.lr_critic)
        self.critic_updates = 0
        self.actor_updates = 0

    # -- acting ---------------------------------------------------------

    def actor_forward(self, s: np.ndarray) -> np.ndarray:
        out = self.actor.forward(s)
        return out[0] if np.asarray(s).ndim == 1 else out

    def select_action(self, s: np.ndarray, rng: np.random.Generator,
                      explore_sigma: float | None = None) -> np.ndarray:
        sigma = self.hyper.explore_sigma if explore_sigma is None else explore_sigma
        a = self.actor_forward(s)
        if sigma > 0.0:
            a = a + rng.normal(0.0, sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def target_action(self, s_next: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        a = self.actor_target.forward(s_next)
        if self.hyper.target_noise_sigma > 0.0:
            eps = rng.normal(0.0, self.hyper.target_noise_sigma, size=a.shape)
            clip = self.hyper.target_noise_clip
            a = a + np.clip(eps, -clip, clip)
        return np.clip(a, -1.0, 1.0)

    # -- learning ---------------------------------------------------------

    def compute_target(self, r: np.ndarray, done: np.ndarray, s_next: np.ndarray,
                       rng: np.random.Generator, return_parts: bool = False):
        s_next = np.atleast_2d(s_next)
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        done = np.atleast_1d(np.asarray(done, dtype=np.float64))
        a2 = self.target_action(s_next, rng)
        x = np.concatenate([s_next, a2], axis=1)
        q1 = self.critic1_target.forward(x)[:, 0]
        q2 = self.critic2_target.forward(x)[:, 0]
        y = r + (1.0 - done) * self.hyper.gamma * np.minimum(q1, q2)
        if return_parts:
            return y, q1, q2, a2
        return y

    def update_critics(self, s: np.ndarray, a: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)
        y = np.asarray(y, dtype=np.float64)
        losses = []
        for net, opt in ((self.critic1, self._opt_c1), (self.critic2, self._opt_c2)):
            pred, cache = net.forward_cached(x)
            err = pred[:, 0] - y
            loss = float(np.mean(err * err))
            if not math.isfinite(loss):
                raise TrainingFault("non-finite critic loss")
            grad_out = (2.0 / err.size) * err[:, None]
            _, grads = net.backward(cache, grad_out)
            opt.step(net.parameters(), grads)
            losses.append(loss)
        return losses[0], losses[1]

    def update_actor(self, s: np.ndarray) -> float:
        s = np.atleast_2d(s)
        a, cache_a = self.actor.forward_cached(s)
        x = np.concatenate([s, a], axis=1)
        q, cache_q = self.critic1.forward_cached(x)
        objective = float(np.mean(q))
        # ascend the first critic: descend -mean(Q)
        grad_q = np.full_like(q, -1.0 / q.shape[0])
        grad_x, _ = self.critic1.backward(cache_q, grad_q)
        grad_a = grad_x[:, self.state_dim:]
        if not np.isfinite(grad_a).all():
            raise TrainingFault("non-finite actor gradient")
        _, grads = self.actor.backward(cache_a, grad_a)
        self._opt_actor.step(self.actor.parameters(), grads)
        return objective

    def train_tick(self, buffer: ReplayBuffer, sample_rng: np.random.Generator,
                   noise_rng: np.random.Generator) -> tuple[float, float]:
        """One critic update; actor and targets every ``policy_delay`` ticks."""
        s, a, r, s2, d = buffer.sample(self.hyper.batch, sample_rng)
        y = self.compute_target(r, d, s2, noise_rng)
        losses = self.update_critics(s, a, y)
        self.critic_updates += 1
        if self.critic_updates % self.hyper.policy_delay == 0:
            self.update_actor(s)
            self.actor_updates += 1
            soft_update(self.actor_target, self.actor, self.hyper.tau)
            soft_update(self.critic1_target, self.critic1, self.hyper.tau)
            soft_update(self.critic2_target, self.critic2, self.hyper.tau)
        return losses

    def nets(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "actor_target": self.actor_target,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }


# -- checkpoints ------------------------------------------------------------

_MAGIC = b"SEACTD3\x00"


def save_checkpoint(path, agent: Td3Agent, seed: int) -> None:
    """Single portable file: magic, JSON header, raw float64 parameter blobs."""
    arrays: list[tuple[str, np.ndarray]] = []
    for net_name, net in agent.nets().items():
        for i, p in enumerate(net.parameters()):
            arrays.append((f"{net_name}.{i}", p))
    header = {
        "version": 1,
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "hidden": agent.hyper.hidden,
        "seed": int(seed),
        "hyper_hash": hyper_hash(agent.hyper),
        "critic_updates": agent.critic_updates,
        "actor_updates": agent.actor_updates,
        "arrays": [{"name": n, "shape": list(p.shape)} for n, p in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, p in arrays:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_MAGIC) + 4 or raw[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    off = len(_MAGIC)
    (hlen,) = struct.unpack("<I", raw[off:off + 4])
    off += 4
    if len(raw) < off + hlen:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw[off:off + hlen])
    off += hlen
    expected = sum(
        8 * int(np.prod(a["shape"])) for a in header["arrays"]
    )
    if len(raw) - off != expected:
        raise CheckpointError(
            f"{path}: payload is {len(raw) - off} bytes, manifest expects {expected}"
        )
    arrays: dict[str, np.ndarray] = {}
    for a in header["arrays"]:
        n = 8 * int(np.prod(a["shape"]))
        arrays[a["name"]] = np.frombuffer(
            raw[off:off + n], dtype="<f8"
        ).reshape(a["shape"]).copy()
        off += n
    return header, arrays


def restore_agent(path, hyper: Td3Hyper, expect_state_dim: int | None = None) -> Td3Agent:
    header, arrays = load_checkpoint(path)
    if expect_state_dim is not None and header["state_dim"] != expect_state_dim:
        raise CheckpointError(
            f"checkpoint trained for state width {header['state_dim']}, "
            f"environment expects {expect_state_dim}"
        )
    if header["hidden"] != hyper.hidden:
        raise CheckpointError("hidden width differs from the checkpoint header")
    agent = Td3Agent(header["state_dim"], header["action_dim"], hyper,
                     np.random.default_rng(0))
    for net_name, net in agent.nets().items():
        for i, p in enumerate(net.parameters()):
            src = arrays[f"{net_name}.{i}"]
            if src.shape != p.shape:
                raise CheckpointError(f"array {net_name}.{i} has shape {src.shape}")
            p[...] = src
    agent.critic_updates = header.get("critic_updates", 0)
    agent.actor_updates = header.get("actor_updates", 0)
    return agent


# -- convergence rule ---------------------------------------------------------

def moving_average(values, window: int = 25) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.size < window:
        return np.empty(0)
    return np.convolve(v, np.ones(window) / window, mode="valid")


def trailing_slopes(series: np.ndarray, window: int = 25) -> np.ndarray:
    """Least-squares slope over each trailing window of the series."""
    s = np.asarray(series, dtype=np.float64)
    if s.size < window:
        return np.empty(0)
    x = np.arange(window) - (window - 1) / 2.0
    denom = float(np.sum(x * x))
    out = np.empty(s.size - window + 1)
    for i in range(out.size):
        seg = s[i:i + window]
        out[i] = float(np.dot(x, seg - seg.mean())) / denom
    return out


def convergence_episode(values, window: int = 25, slope_tol: float = 0.2,
                        run_length: int = 50) -> int | None:
    """First episode (0-based) completing ``run_length`` consecutive episodes
    whose smoothed metric has trailing slope magnitude below ``slope_tol``.

    The metric is smoothed with a ``window``-episode moving average and the
    per-episode slope is the least-squares fit over the trailing ``window``
    smoothed points.
    """
    ma = moving_average(values, window)
    slopes = trailing_slopes(ma, window)
    count = 0
    for i, s in enumerate(slopes):
        count = count + 1 if abs(s) < slope_tol else 0
        if count >= run_length:
            return i + 2 * (window - 1)
    return None


# -- training loop ------------------------------------------------------------

@dataclass
class TrainResult:
    curves: dict[str, list]
    agent: Td3Agent
    convergence: int | None
    env_steps: int
    episode_metrics: list


def train(env: MissionEnv, hyper: Td3Hyper, seed: int,
          progress=None) -> TrainResult:
    """Run the full training schedule on one environment.

    ``progress`` (optional) is called once per episode with
    ``(episode_index, arpt_moving_avg, converged_flag)``.
    Fully reproducible for a given seed.
    """
    root = np.random.SeedSequence(seed)
    init_ss, explore_ss, tnoise_ss, sample_ss, env_ss = root.spawn(5)
    init_rng = np.random.default_rng(init_ss)
    explore_rng = np.random.default_rng(explore_ss)
    tnoise_rng = np.random.default_rng(tnoise_ss)
    sample_rng = np.random.default_rng(sample_ss)

    m = env.cfg.n_auv
    agent = Td3Agent(env.cfg.state_dim, 2, hyper, init_rng)
    buffer = ReplayBuffer(hyper.buffer_capacity, env.cfg.state_dim, 2)

    curves: dict[str, list] = {
        "episode": [], "arpt": [], "sdr_mbps": [], "ec_w": [], "ssn": [],
    }
    per_episode = []
    total = 0
    for ep in range(hyper.episodes):
        states = env.reset(env_ss.spawn(1)[0])
        done = False
        while not done:
            if total < hyper.warmup_steps:
                actions = explore_rng.uniform(-1.0, 1.0, size=(m, 2))
            else:
                actions = np.stack(
                    [agent.select_action(s, explore_rng) for s in states]
                )
            next_states, rewards, done, _ = env.step(actions)
            flag = 1.0 if done else 0.0
            for k in range(m):
                buffer.add(Transition(states[k], actions[k], rewards[k],
                                      next_states[k], flag))
            states = next_states
            if total >= hyper.warmup_steps and len(buffer) >= hyper.batch:
                agent.train_tick(buffer, sample_rng, tnoise_rng)
            total += 1
        metrics = env.episode_metrics()
        per_episode.append(metrics)
        curves["episode"].append(ep)
        curves["arpt"].append(metrics.arpt)
        curves["sdr_mbps"].append(metrics.sdr)
        curves["ec_w"].append(metrics.ec)
        curves["ssn"].append(metrics.ssn)
        if progress is not None:
            conv = convergence_episode(curves["arpt"])
            ma = moving_average(curves["arpt"])
            progress(ep, float(ma[-1]) if ma.size else metrics.arpt, conv is not None)

    return TrainResult(
        curves=curves,
        agent=agent,
        convergence=convergence_episode(curves["arpt"]),
        env_steps=total,
        episode_metrics=per_episode,
    )


def greedy_rollout(env: MissionEnv, agent: Td3Agent, seed) -> dict:
    """Noise-free policy rollout; returns the episode metrics and records."""
    states = env.reset(seed)
    done = False
    while not done:
        actions = np.stack([agent.actor_forward(s) for s in states])
        states, _, done, _ = env.step(actions)
    return {"metrics": env.episode_metrics(), "records": env.records}


def random_rollout(env: MissionEnv, rng: np.random.Generator, seed) -> dict:
    """Uniform-random policy baseline rollout."""
    env.reset(seed)
    done = False
    while not done:
        actions = rng.uniform(-1.0, 1.0, size=(env.cfg.n_auv, 2))
        _, _, done, _ = env.step(actions)
    return {"metrics": env.episode_metrics(), "records": env.records}
