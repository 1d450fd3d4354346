"""Trajectories, V-trace targets and the actor-critic loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import log_softmax

POLICY_TAGS = ("cross", "instance", "low")


@dataclass
class Trajectory:
    """One episode of one policy.

    ``behavior`` holds μ(a_t|s_t) under the policy that acted. Low-level
    trajectories also carry the usage bins of the candidate neighbours at each
    step (``neighbor_bins``), which together with the state determine the
    action features.
    """

    policy: str
    states: np.ndarray
    actions: np.ndarray
    behavior: np.ndarray
    rewards: np.ndarray = field(default=None)  # type: ignore[assignment]
    neighbor_bins: np.ndarray | None = None

    def __post_init__(self):
        if self.policy not in POLICY_TAGS:
            raise ValueError(f"unknown policy tag {self.policy!r}")
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.behavior = np.asarray(self.behavior, dtype=np.float64)
        if self.rewards is None:
            self.rewards = np.zeros(len(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def set_terminal_reward(self, reward: float) -> None:
        self.rewards = np.zeros(len(self))
        if len(self):
            self.rewards[-1] = reward


def vtrace_targets(rewards, values, pi, mu, gamma: float = 1.0,
                   rho_bar: float = 1.0, c_bar: float = 1.0) -> np.ndarray:
    """V-trace value targets for every step of one finished episode.

    Each target is the current value estimate plus the discounted,
    trace-weighted sum of importance-weighted TD errors from that step to the
    end of the episode. The value after the terminal step is taken as 0.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = len(rewards)
    if n == 0:
        raise ValueError("trajectory is empty")
    if not (len(values) == len(pi) == len(mu) == n):
        raise ValueError("rewards, values, pi and mu must have equal lengths")
    if np.any(mu <= 0):
        raise ValueError("behaviour probabilities must be positive")
    ratio = pi / mu
    rho = np.minimum(rho_bar, ratio)
    c = np.minimum(c_bar, ratio)
    next_values = np.append(values[1:], 0.0)
    one_step = rewards + gamma * next_values
    delta = rho * (one_step - values)
    targets = np.empty(n)
    for s in range(n):
        # weights[t - s - 1] = gamma^(t-s) * prod_{i=s}^{t-1} c_i for t > s
        weights = np.cumprod(gamma * c[s:n - 1])
        # V + delta_s written as a blend so rho = 1 returns the one-step target exactly
        targets[s] = rho[s] * one_step[s] + (1.0 - rho[s]) * values[s] + weights @ delta[s + 1:]
    return targets


@dataclass
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    n_steps: int


def _stack(batch: list[Trajectory]):
    states = np.concatenate([t.states for t in batch])
    actions = np.concatenate([t.actions for t in batch])
    behavior = np.concatenate([t.behavior for t in batch])
    rewards = np.concatenate([t.rewards for t in batch])
    extra = None
    if batch[0].neighbor_bins is not None:
        extra = np.concatenate([t.neighbor_bins for t in batch])
    bounds = np.cumsum([0] + [len(t) for t in batch])
    return states, actions, behavior, rewards, extra, bounds


def impala_loss(net, batch: list[Trajectory], gamma: float = 1.0, rho_bar: float = 1.0,
                c_bar: float = 1.0, entropy_coef: float = 0.0):
    """Summed actor-critic loss over a batch of trajectories and its gradients.

    Per step the loss is ``-rho * log pi(a|s) * A + 0.5 * (v - V(s))^2 -
    entropy_coef * H(pi(.|s))`` where ``A = r + gamma * v_next - V(s)`` and the
    V-trace targets ``v`` are constants. Returns ``(LossStats, grads)``.
    """
    batch = [t for t in batch if len(t)]
    if not batch:
        raise ValueError("batch has no steps")
    states, actions, behavior, rewards, extra, bounds = _stack(batch)
    logits, values, cache = net.forward(states, extra)
    logp = log_softmax(logits)
    p = np.exp(logp)
    rows = np.arange(len(actions))
    pi_a = p[rows, actions]

    targets = np.empty_like(values)
    next_targets = np.empty_like(values)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        vs = vtrace_targets(rewards[lo:hi], values[lo:hi], pi_a[lo:hi], behavior[lo:hi], gamma, rho_bar, c_bar)
        targets[lo:hi] = vs
        next_targets[lo:hi] = np.append(vs[1:], 0.0)
    rho = np.minimum(rho_bar, pi_a / behavior)
    advantage = rewards + gamma * next_targets - values
    entropy = -np.sum(p * logp, axis=1)

    pg_weight = rho * advantage
    policy_loss = -np.sum(pg_weight * logp[rows, actions])
    value_err = targets - values
    value_loss = 0.5 * np.sum(value_err**2)
    loss = policy_loss + value_loss - entropy_coef * np.sum(entropy)

    dlogits = p * pg_weight[:, None]
    dlogits[rows, actions] -= pg_weight
    dlogits += entropy_coef * p * (logp + entropy[:, None])
    dvalues = -value_err
    grads = net.backward(cache, dlogits, dvalues)
    stats = LossStats(float(loss), float(policy_loss), float(value_loss), float(entropy.mean()), len(actions))
    return stats, grads
