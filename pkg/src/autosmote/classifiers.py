"""Base classifiers behind a common fit/predict interface.

All models are written against numpy only and are deterministic given the
training data and ``ClassifierSpec.seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import Dataset
from .metrics import score

KINDS = ("knn", "decision_tree", "adaboost", "linear_svm")

DEFAULTS: dict[str, dict[str, Any]] = {
    "knn": {"k": 5},
    "decision_tree": {"max_depth": 10, "min_samples_split": 2},
    "adaboost": {"n_rounds": 50},
    "linear_svm": {"epochs": 100, "lam": 1e-4, "eta0": 0.1},
}

_GAIN_TOL = 1e-12


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "decision_tree"
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")
        params = self.params
        for name in ("k", "max_depth", "n_rounds", "epochs"):
            if name in params and (int(params[name]) != params[name] or params[name] < 1):
                raise ValueError(f"{name} must be a positive integer, got {params[name]!r}")
        if "min_samples_split" in params and params["min_samples_split"] < 2:
            raise ValueError("min_samples_split must be at least 2")
        for name in ("lam", "eta0"):
            if name in params and not params[name] > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def params(self) -> dict[str, Any]:
        return {**DEFAULTS[self.kind], **self.hyperparameters}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------


class _Tree:
    """Binary CART tree grown on Gini impurity with optional sample weights."""

    def __init__(self, max_depth: int, min_samples_split: int):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[int] = []

    def _new_node(self, value: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    @staticmethod
    def _best_split(X: np.ndarray, y: np.ndarray, w: np.ndarray):
        """Best (feature, threshold) over all features, or None.

        Ties in gain go to the lower feature index, then the lower threshold.
        """
        n = X.shape[0]
        order = np.argsort(X, axis=0, kind="stable")
        xs = np.take_along_axis(X, order, axis=0)
        w1 = (w * y)[order]
        w0 = (w * (1 - y))[order]
        left1 = np.cumsum(w1, axis=0)[:-1]
        left0 = np.cumsum(w0, axis=0)[:-1]
        tot1, tot0 = left1[-1] + w1[-1], left0[-1] + w0[-1]
        total = tot1 + tot0
        right1 = tot1 - left1
        right0 = tot0 - left0
        lw = left1 + left0
        rw = right1 + right0
        with np.errstate(divide="ignore", invalid="ignore"):
            # weighted child impurity = (lw - (l1^2+l0^2)/lw + rw - (r1^2+r0^2)/rw) / total
            child = (lw - (left1**2 + left0**2) / lw + rw - (right1**2 + right0**2) / rw) / total
        parent = 1.0 - (tot1**2 + tot0**2) / total**2
        gain = parent - child
        valid = (xs[1:] > xs[:-1]) & (lw > 0) & (rw > 0)
        gain = np.where(valid, gain, -np.inf).T  # (features, positions): feature-major order
        best = gain.max() if gain.size else -np.inf
        if not np.isfinite(best):
            return None
        flat = int(np.flatnonzero(gain.ravel() >= best - _GAIN_TOL)[0])
        feat, pos = divmod(flat, n - 1)
        lo, hi = xs[pos, feat], xs[pos + 1, feat]
        thr = (lo + hi) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return feat, float(thr)

    @staticmethod
    def _leaf_value(y: np.ndarray, w: np.ndarray) -> int:
        return int(np.sum(w * y) > np.sum(w * (1 - y)))

    def fit(self, X: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> "_Tree":
        w = np.ones(len(y)) if w is None else np.asarray(w, dtype=np.float64)
        root = self._new_node(self._leaf_value(y, w))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yn, wn = y[rows], w[rows]
            if depth >= self.max_depth or len(rows) < self.min_samples_split:
                continue
            if yn.min() == yn.max():
                continue
            found = self._best_split(X[rows], yn, wn)
            if found is None:
                continue
            feat, thr = found
            go_left = X[rows, feat] <= thr
            lrows, rrows = rows[go_left], rows[~go_left]
            left = self._new_node(self._leaf_value(y[lrows], w[lrows]))
            right = self._new_node(self._leaf_value(y[rrows], w[rrows]))
            self.feature[node], self.threshold[node] = feat, thr
            self.left[node], self.right[node] = left, right
            # right pushed first so the left subtree is grown first
            stack.append((right, rrows, depth + 1))
            stack.append((left, lrows, depth + 1))
        self._freeze()
        return self

    def _freeze(self):
        self.feature_ = np.array(self.feature, dtype=np.int64)
        self.threshold_ = np.array(self.threshold)
        self.left_ = np.array(self.left, dtype=np.int64)
        self.right_ = np.array(self.right, dtype=np.int64)
        self.value_ = np.array(self.value, dtype=np.int64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature_[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            goes_left = X[idx, self.feature_[cur]] <= self.threshold_[cur]
            node[idx] = np.where(goes_left, self.left_[cur], self.right_[cur])
            active[idx] = self.feature_[node[idx]] >= 0
        return self.value_[node]

    @property
    def depth(self) -> int:
        depths = {0: 0}
        for i in range(len(self.value)):
            for child in (self.left[i], self.right[i]):
                if child >= 0:
                    depths[child] = depths[i] + 1
        return max(depths.values())


# ---------------------------------------------------------------------------
# Fitted models
# ---------------------------------------------------------------------------


def _knn_predict(train_X, train_y, X, k):
    k = min(k, len(train_y))
    out = np.empty(X.shape[0], dtype=np.int64)
    chunk = max(1, 2_000_000 // max(1, train_X.size))
    for start in range(0, X.shape[0], chunk):
        q = X[start:start + chunk]
        d = np.sum((q[:, None, :] - train_X[None, :, :]) ** 2, axis=2)
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        votes = train_y[nearest].sum(axis=1)
        # strict majority needed for the minority class; class ties go to majority
        out[start:start + chunk] = (2 * votes > k).astype(np.int64)
    return out


def _fit_adaboost(X, y, n_rounds, max_depth=1):
    n = len(y)
    w = np.full(n, 1.0 / n)
    stumps, alphas = [], []
    for _ in range(n_rounds):
        stump = _Tree(max_depth, 2).fit(X, y, w)
        miss = stump.predict(X) != y
        err = float(np.sum(w[miss]) / np.sum(w))
        if err >= 0.5:
            if not stumps:
                stumps.append(stump)
                alphas.append(1.0)
            break
        if err <= 0.0:
            stumps.append(stump)
            alphas.append(1.0)
            break
        alpha = math.log((1.0 - err) / err)
        stumps.append(stump)
        alphas.append(alpha)
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return stumps, np.array(alphas)


def _fit_linear_svm(X, y, epochs, lam, eta0, seed):
    n, d = X.shape
    signs = np.where(y == 1, 1.0, -1.0)
    order = np.random.default_rng(seed).permutation(n)
    w = np.zeros(d)
    b = 0.0
    t0 = 1.0 / (lam * eta0)
    t = 0
    for _ in range(epochs):
        for i in order:
            eta = 1.0 / (lam * (t + t0))
            margin = signs[i] * (X[i] @ w + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * signs[i] * X[i]
                b += eta * signs[i]
            t += 1
    return w, b


@dataclass
class TrainedClassifier:
    spec: ClassifierSpec
    n_features: int
    state: Any

    def predict(self, features: np.ndarray) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.size == 0 and X.ndim < 2:
            return np.zeros(0, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        kind = self.spec.kind
        if kind == "knn":
            train_X, train_y = self.state
            return _knn_predict(train_X, train_y, X, self.spec.params["k"])
        if kind == "decision_tree":
            return self.state.predict(X)
        if kind == "adaboost":
            stumps, alphas = self.state
            votes = sum(a * np.where(s.predict(X) == 1, 1.0, -1.0) for s, a in zip(stumps, alphas))
            return (votes > 0).astype(np.int64)
        w, b = self.state
        return (X @ w + b > 0).astype(np.int64)


def fit(spec: ClassifierSpec, train: Dataset) -> TrainedClassifier:
    y = train.labels
    if train.n_rows == 0 or y.min() == y.max():
        raise ValueError("training data must contain both classes")
    X = train.features
    p = spec.params
    if spec.kind == "knn":
        state = (X.copy(), y.copy())
    elif spec.kind == "decision_tree":
        state = _Tree(p["max_depth"], p["min_samples_split"]).fit(X, y)
    elif spec.kind == "adaboost":
        state = _fit_adaboost(X, y, p["n_rounds"])
    else:
        state = _fit_linear_svm(X, y, p["epochs"], p["lam"], p["eta0"], spec.seed)
    return TrainedClassifier(spec, X.shape[1], state)


def predict(model: TrainedClassifier, features: np.ndarray) -> np.ndarray:
    return model.predict(features)


def evaluate(model: TrainedClassifier, eval_set: Dataset, metric: str) -> float:
    if eval_set.n_rows == 0:
        raise ValueError("evaluation set is empty")
    return score(metric, eval_set.labels, model.predict(eval_set.features))
