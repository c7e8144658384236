"""Minimal float64 DQN: numpy MLP, Adam, replay buffer, target network."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MLP:
    """Fully connected ReLU network with a linear head, float64 throughout."""

    def __init__(self, dims: list[int], rng: np.random.Generator) -> None:
        self.dims = list(dims)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            scale = math.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def copy_from(self, other: "MLP") -> None:
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (batch, in) -> (batch, out)."""
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    def q_single(self, obs: np.ndarray) -> np.ndarray:
        return self.forward(obs[None, :])[0]

    def backward(self, x: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """Gradients of mean squared TD error on the selected actions."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        pre = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            pre.append(z)
            h = np.maximum(z, 0.0) if k < last else z
            acts.append(h)
        q = acts[-1]
        batch = x.shape[0]
        delta = np.zeros_like(q)
        idx = np.arange(batch)
        td = q[idx, actions] - targets
        delta[idx, actions] = 2.0 * td / batch
        grads_w, grads_b = [None] * len(self.weights), [None] * len(self.weights)
        g = delta
        for k in range(last, -1, -1):
            grads_w[k] = g.T @ acts[k]
            grads_b[k] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.weights[k]) * (pre[k - 1] > 0.0)
        loss = float(np.mean(td**2))
        return loss, grads_w, grads_b


class Adam:
    def __init__(self, net: MLP, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> None:
        self.net = net
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def step(self, grads_w, grads_b) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k in range(len(self.net.weights)):
            for param, grad, m, v in (
                (self.net.weights[k], grads_w[k], self.m_w[k], self.v_w[k]),
                (self.net.biases[k], grads_b[k], self.m_b[k], self.v_b[k]),
            ):
                m *= self.beta1
                m += (1 - self.beta1) * grad
                v *= self.beta2
                v += (1 - self.beta2) * grad**2
                param -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int) -> None:
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.pos = 0

    def add(self, obs, action, reward, next_obs, terminal) -> None:
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminal[i] = terminal
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.terminal[idx],
        )


@dataclass
class DQNConfig:
    hidden: tuple[int, ...] = (64, 64)
    steps: int = 100_000
    lr: float = 1e-3
    gamma: float = 0.99
    batch_size: int = 64
    buffer_size: int = 100_000
    learn_start: int = 1_000
    train_every: int = 1
    target_update: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 30_000
    eval_every: int = 2_000
    eval_episodes: int = 20
    progress_scale: float = 0.0  # training-only bonus per metre of goal progress (CA)


@dataclass
class TrainResult:
    best_net: MLP
    best_eval_reward: float
    eval_history: list = field(default_factory=list)


def epsilon_at(cfg: DQNConfig, step: int) -> float:
    frac = min(1.0, step / max(1, cfg.eps_decay_steps))
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def evaluate(env, net: MLP, episodes: int, seed_base: int) -> float:
    total = 0.0
    for ep in range(episodes):
        obs = env.reset(np.random.SeedSequence((seed_base, ep)))
        done = False
        ep_reward = 0.0
        while not done:
            action = int(np.argmax(net.q_single(obs)))
            obs, reward, terminal, truncated = env.step(action)
            ep_reward += reward
            done = terminal or truncated
        total += ep_reward
    return total / episodes


def train(env_factory, cfg: DQNConfig, seed: int, log=print) -> TrainResult:
    rng = np.random.default_rng(seed)
    env = env_factory()
    dims = [env.obs_dim, *cfg.hidden, env.num_actions]
    net = MLP(dims, rng)
    target = MLP(dims, rng)
    target.copy_from(net)
    opt = Adam(net, cfg.lr)
    buf = ReplayBuffer(cfg.buffer_size, env.obs_dim)
    eval_env = env_factory()

    best = MLP(dims, rng)
    best.copy_from(net)
    best_eval = -math.inf
    history = []

    obs = env.reset(np.random.SeedSequence((seed, 0)))
    episode = 0
    prev_dist = env.goal_distance() if cfg.progress_scale else 0.0
    for step in range(cfg.steps):
        if rng.uniform() < epsilon_at(cfg, step):
            action = int(rng.integers(env.num_actions))
        else:
            action = int(np.argmax(net.q_single(obs)))
        next_obs, reward, terminal, truncated = env.step(action)
        if cfg.progress_scale:
            dist = env.goal_distance()
            reward = reward + cfg.progress_scale * (prev_dist - dist)
            prev_dist = dist
        buf.add(obs, action, reward, next_obs, terminal)
        obs = next_obs
        if terminal or truncated:
            episode += 1
            obs = env.reset(np.random.SeedSequence((seed, episode)))
            prev_dist = env.goal_distance() if cfg.progress_scale else 0.0

        if buf.size >= cfg.learn_start and step % cfg.train_every == 0:
            states, actions, rewards, next_states, terminals = buf.sample(cfg.batch_size, rng)
            next_q = target.forward(next_states).max(axis=1)
            targets = rewards + cfg.gamma * next_q * (~terminals)
            _, gw, gb = net.backward(states, actions, targets)
            opt.step(gw, gb)
        if step % cfg.target_update == 0:
            target.copy_from(net)
        if (step + 1) % cfg.eval_every == 0:
            score = evaluate(eval_env, net, cfg.eval_episodes, seed_base=10_000 + seed)
            history.append((step + 1, score))
            if score > best_eval:
                best_eval = score
                best.copy_from(net)
            log(f"step {step + 1}: eval reward {score:.2f} (best {best_eval:.2f})")
    return TrainResult(best_net=best, best_eval_reward=best_eval, eval_history=history)
