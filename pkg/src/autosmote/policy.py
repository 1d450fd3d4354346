"""State/action featurization and the three policy-value networks."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .nn import Mlp, init_linear, softmax

N_BINS = 10
LAMBDAS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
N_LAMBDAS = len(LAMBDAS)
ACTION_FEATURE_DIM = N_BINS + N_LAMBDAS


def usage_bin(count) -> np.ndarray | int:
    """Bin index for usage counts: width-10 bins, last bin open-ended."""
    b = np.minimum(np.asarray(count), 99) // 10
    return int(b) if b.ndim == 0 else b.astype(np.int64)


def bin_onehot(count: int) -> np.ndarray:
    out = np.zeros(N_BINS)
    out[usage_bin(count)] = 1.0
    return out


def state_features(instance_idx: int, minority: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Instance features followed by the one-hot bin of its usage count."""
    return np.concatenate([minority[instance_idx], bin_onehot(int(counts[instance_idx]))])


def cross_state(minority: np.ndarray) -> np.ndarray:
    """Dataset-level state for the single cross-instance decision."""
    return np.concatenate([minority.mean(axis=0), bin_onehot(0)])


def low_action_features(lambda_slot: int, neighbor_idx: int, counts: np.ndarray) -> np.ndarray:
    """Neighbour usage bin one-hot followed by the λ-slot one-hot (15 values)."""
    out = np.zeros(ACTION_FEATURE_DIM)
    out[usage_bin(int(counts[neighbor_idx]))] = 1.0
    out[N_BINS + lambda_slot] = 1.0
    return out


def split_action(flat: int) -> tuple[int, int]:
    """Flat low-level action index -> (neighbour slot, λ slot)."""
    return divmod(int(flat), N_LAMBDAS)


class DiscretePolicy:
    """Trunk MLP with a softmax policy head over ``n_actions`` and a value head."""

    def __init__(self, state_dim: int, n_actions: int, hidden: int = 128,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.trunk = Mlp([state_dim, hidden, hidden], rng, activate_last=True)
        self.Wp, self.bp = init_linear(rng, hidden, n_actions)
        self.Wv, self.bv = init_linear(rng, hidden, 1)

    @property
    def params(self) -> list[np.ndarray]:
        return self.trunk.params + [self.Wp, self.bp, self.Wv, self.bv]

    def forward(self, states: np.ndarray, extra=None):
        """Logits (B, A) and values (B,) plus a cache for ``backward``."""
        h, trunk_cache = self.trunk.forward_cache(states)
        logits = h @ self.Wp + self.bp
        values = (h @ self.Wv + self.bv)[:, 0]
        return logits, values, (h, trunk_cache)

    def backward(self, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> list[np.ndarray]:
        h, trunk_cache = cache
        dh = dlogits @ self.Wp.T + dvalues[:, None] @ self.Wv.T
        trunk_grads, _ = self.trunk.backward(trunk_cache, dh)
        return trunk_grads + [h.T @ dlogits, dlogits.sum(0), h.T @ dvalues[:, None], np.array([dvalues.sum()])]

    def probs(self, state: np.ndarray, extra=None) -> np.ndarray:
        W0, b0, W1, b1 = self.trunk.params
        h = np.maximum(np.maximum(state @ W0 + b0, 0.0) @ W1 + b1, 0.0)
        return softmax(h @ self.Wp + self.bp)


class LowPolicy:
    """Trunk MLP plus a state-action scorer over (neighbour slot, λ slot) pairs.

    The scorer is a one-hidden-layer MLP on ``[representation, action
    features]``. Its first layer is stored as separate blocks for the
    representation, the neighbour bin one-hot and the λ one-hot so the
    one-hot products become row lookups.
    """

    def __init__(self, state_dim: int, hidden: int = 128, scorer_hidden: int = 128,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.state_dim = state_dim
        self.trunk = Mlp([state_dim, hidden, hidden], rng, activate_last=True)
        W1, self.b1 = init_linear(rng, hidden + ACTION_FEATURE_DIM, scorer_hidden)
        self.W_rep = W1[:hidden].copy()
        self.W_bin = W1[hidden:hidden + N_BINS].copy()
        self.W_lam = W1[hidden + N_BINS:].copy()
        W2, _ = init_linear(rng, scorer_hidden, 1)
        self.w_out = W2[:, 0].copy()
        self.Wv, self.bv = init_linear(rng, hidden, 1)

    @property
    def params(self) -> list[np.ndarray]:
        return self.trunk.params + [self.W_rep, self.W_bin, self.W_lam, self.b1, self.w_out, self.Wv, self.bv]

    def _bin_scores(self, A: np.ndarray):
        # the scorer input only varies with (neighbour bin, λ slot), so score
        # all 10 x 5 combinations once and gather per neighbour afterwards
        z = A[..., None, None, :] + self.W_bin[:, None, :] + self.W_lam[None, :, :]
        u = np.maximum(z, 0.0)
        return z, u, u @ self.w_out

    def forward(self, states: np.ndarray, neighbor_bins: np.ndarray):
        """Logits (B, 5K) with flat index ``slot * 5 + λ slot``, values (B,)."""
        h, trunk_cache = self.trunk.forward_cache(states)
        nb = np.asarray(neighbor_bins, dtype=np.int64)
        B, K = nb.shape
        z, u, scores = self._bin_scores(h @ self.W_rep + self.b1)
        logits = scores[np.arange(B)[:, None], nb].reshape(B, K * N_LAMBDAS)
        values = (h @ self.Wv + self.bv)[:, 0]
        return logits, values, (h, trunk_cache, nb, z, u)

    def backward(self, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> list[np.ndarray]:
        h, trunk_cache, nb, z, u = cache
        B, K = nb.shape
        H = u.shape[-1]
        onehot = np.zeros((B, K, N_BINS))
        onehot[np.arange(B)[:, None], np.arange(K), nb] = 1.0
        dscores = onehot.transpose(0, 2, 1) @ dlogits.reshape(B, K, N_LAMBDAS)  # (B, bins, λ)
        d_wout = u.reshape(-1, H).T @ dscores.ravel()
        dz = dscores[..., None] * self.w_out * (z > 0)
        dA = dz.sum(axis=(1, 2))
        d_wbin = dz.sum(axis=(0, 2))
        d_wlam = dz.sum(axis=(0, 1))
        dh = dA @ self.W_rep.T + dvalues[:, None] @ self.Wv.T
        trunk_grads, _ = self.trunk.backward(trunk_cache, dh)
        return trunk_grads + [h.T @ dA, d_wbin, d_wlam, dA.sum(axis=0), d_wout,
                              h.T @ dvalues[:, None], np.array([dvalues.sum()])]

    def probs(self, state: np.ndarray, neighbor_bins: np.ndarray) -> np.ndarray:
        # single-state fast path used inside episodes; matches forward()
        W0, b0, W1, b1 = self.trunk.params
        h = np.maximum(np.maximum(state @ W0 + b0, 0.0) @ W1 + b1, 0.0)
        scores = self._bin_scores(h @ self.W_rep + self.b1)[2]
        return softmax(scores[neighbor_bins].ravel())


class UniformPolicy:
    """Uniform distribution over a fixed action count; used by random search."""

    def __init__(self, n_actions: int | None = None):
        self.n_actions = n_actions

    def probs(self, state: np.ndarray, extra=None) -> np.ndarray:
        n = self.n_actions if extra is None else len(extra) * N_LAMBDAS
        return np.full(n, 1.0 / n)


@dataclass
class PolicyBundle:
    cross: DiscretePolicy | UniformPolicy
    instance: DiscretePolicy | UniformPolicy
    low: LowPolicy | UniformPolicy

    @classmethod
    def create(cls, state_dim: int, G1: int, G2: int, hidden: int = 128,
               rng: np.random.Generator | None = None) -> "PolicyBundle":
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls(
            DiscretePolicy(state_dim, G1 + 1, hidden, rng),
            DiscretePolicy(state_dim, G2 + 1, hidden, rng),
            LowPolicy(state_dim, hidden, hidden, rng),
        )

    @classmethod
    def uniform(cls, G1: int, G2: int) -> "PolicyBundle":
        return cls(UniformPolicy(G1 + 1), UniformPolicy(G2 + 1), UniformPolicy())

    @property
    def learnable(self) -> bool:
        return not isinstance(self.cross, UniformPolicy)

    def get(self, tag: str):
        return getattr(self, tag)

    def snapshot(self) -> dict[str, list[np.ndarray]]:
        if not self.learnable:
            return {}
        return {tag: [p.copy() for p in self.get(tag).params] for tag in ("cross", "instance", "low")}

    def load(self, snapshot: dict[str, list[np.ndarray]]) -> None:
        for tag, arrays in snapshot.items():
            for p, new in zip(self.get(tag).params, arrays):
                if p.shape != new.shape:
                    raise ValueError(f"{tag}: shape mismatch {p.shape} vs {new.shape}")
                p[...] = new

    def clone(self) -> "PolicyBundle":
        return copy.deepcopy(self)
