"""Small float64 neural-network toolkit: MLP with manual backprop and Adam."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "autosmote-params"
CHECKPOINT_VERSION = 1


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


class Mlp:
    """Stack of affine layers with ReLU between them.

    With ``activate_last`` the final layer is followed by a ReLU as well,
    which is how the policy trunks produce a state representation.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 activate_last: bool = False):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output size")
        self.sizes = tuple(int(s) for s in sizes)
        self.activate_last = activate_last
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.params.extend(init_linear(rng, fan_in, fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input dimension {self.sizes[0]}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cache(x)[0]

    def forward_cache(self, x: np.ndarray):
        h = self._check_input(x)
        inputs, pre = [], []
        for layer in range(self.n_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            inputs.append(h)
            z = h @ W + b
            pre.append(z)
            last = layer == self.n_layers - 1
            h = np.maximum(z, 0.0) if (not last or self.activate_last) else z
        return h, (inputs, pre)

    def backward(self, cache, dout: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss w.r.t. params and input, given d(loss)/d(output)."""
        inputs, pre = cache
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        g = np.asarray(dout, dtype=np.float64)
        for layer in reversed(range(self.n_layers)):
            last = layer == self.n_layers - 1
            if not last or self.activate_last:
                g = g * (pre[layer] > 0)
            x = inputs[layer]
            W = self.params[2 * layer]
            if x.ndim == 1:
                grads[2 * layer] = np.outer(x, g)
                grads[2 * layer + 1] = g.copy()
            else:
                grads[2 * layer] = x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
                grads[2 * layer + 1] = g.reshape(-1, g.shape[-1]).sum(axis=0)
            g = g @ W.T
        return grads, g


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


class Adam:
    """Bias-corrected Adam with optional global gradient-norm clipping.

    ``step`` updates ``params`` in place and returns False (leaving parameters
    and moments untouched) when any gradient is non-finite.
    """

    def __init__(self, params: Sequence[np.ndarray], lr: float = 0.005, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float | None = 40.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.skipped = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> bool:
        if len(params) != len(self.m) or any(p.shape != m.shape for p, m in zip(params, self.m)):
            raise ValueError("parameter shapes do not match optimizer state")
        norm = global_norm(grads)
        if not np.isfinite(norm):
            self.skipped += 1
            logger.warning("non-finite gradient; update skipped")
            return False
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / norm
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = g * scale
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True


def save_params(path: str | Path, named: dict[str, Sequence[np.ndarray]], meta: dict | None = None) -> None:
    """Write groups of arrays as JSON: shapes plus flat float lists."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "groups": {
            name: [{"shape": list(a.shape), "data": a.ravel().tolist()} for a in arrays]
            for name, arrays in named.items()
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_params(path: str | Path) -> tuple[dict[str, list[np.ndarray]], dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path} is not a supported parameter checkpoint")
    groups = {
        name: [np.array(entry["data"], dtype=np.float64).reshape(entry["shape"]) for entry in arrays]
        for name, arrays in payload["groups"].items()
    }
    return groups, payload["meta"]
